#pragma once

// Umbrella header pulling in the whole library.

#include <cophmm/errors.hpp>
#include <cophmm/numeric.hpp>
#include <cophmm/rng.hpp>
#include <cophmm/cmp.hpp>
#include <cophmm/copula.hpp>
#include <cophmm/data.hpp>
#include <cophmm/model.hpp>
#include <cophmm/likelihood.hpp>
#include <cophmm/optimize.hpp>
#include <cophmm/estimation.hpp>
#include <cophmm/decode.hpp>
#include <cophmm/simulate.hpp>
#include <cophmm/io.hpp>
