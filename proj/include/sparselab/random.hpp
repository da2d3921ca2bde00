#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "sparselab/functions.hpp"

namespace sparselab {

std::uint64_t splitmix64(std::uint64_t x);
// Independent stream seed for (seed, stream) pairs; same inputs give the same stream everywhere.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

enum class Recipe { spikes, haar, bumps, noise, mixed };

std::string to_string(Recipe r);
Recipe recipe_from_string(const std::string& s);

// Random test function on a 1D or 2D lattice with n atoms (row-major when 2D).
GridFunction random_function(Recipe recipe, const DiscreteSpace& space, std::mt19937_64& rng);
// Mixed recipe picks spikes/haar/bumps/noise from a hash of the index.
GridFunction corpus_function(Recipe recipe, const DiscreteSpace& space, std::uint64_t seed, std::uint64_t index);

// Positive weights: power |x - x0|^a, log-normal noise, dyadic products.
GridFunction power_weight(const DiscreteSpace& space, double a, double x0);
GridFunction random_weight(const DiscreteSpace& space, std::mt19937_64& rng);

}  // namespace sparselab
