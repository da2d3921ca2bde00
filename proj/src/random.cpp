#include "sparselab/random.hpp"

#include <cmath>
#include <stdexcept>

namespace sparselab {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

std::string to_string(Recipe r) {
    switch (r) {
        case Recipe::spikes: return "spikes";
        case Recipe::haar: return "haar";
        case Recipe::bumps: return "bumps";
        case Recipe::noise: return "noise";
        case Recipe::mixed: return "mixed";
    }
    return "mixed";
}

Recipe recipe_from_string(const std::string& s) {
    if (s == "spikes") return Recipe::spikes;
    if (s == "haar") return Recipe::haar;
    if (s == "bumps") return Recipe::bumps;
    if (s == "noise") return Recipe::noise;
    if (s == "mixed") return Recipe::mixed;
    throw std::invalid_argument("unknown function recipe: " + s);
}

namespace {

double uniform(std::mt19937_64& rng, double a, double b) { return std::uniform_real_distribution<double>(a, b)(rng); }
int uniform_int(std::mt19937_64& rng, int a, int b) { return std::uniform_int_distribution<int>(a, b)(rng); }

// unit-square coordinates of an atom
std::array<double, 2> unit_coord(const DiscreteSpace& s, int i) {
    int nx = s.shape[0], ny = s.shape[1];
    return {(i % nx + 0.5) / nx, (i / nx + 0.5) / ny};
}

}  // namespace

GridFunction random_function(Recipe recipe, const DiscreteSpace& space, std::mt19937_64& rng) {
    const int n = space.size();
    GridFunction f(static_cast<size_t>(n), 0.0);
    switch (recipe) {
        case Recipe::spikes: {
            int k = uniform_int(rng, 1, 4);
            for (int j = 0; j < k; ++j) f[static_cast<size_t>(uniform_int(rng, 0, n - 1))] += uniform(rng, -1.0, 1.0) >= 0 ? uniform(rng, 0.5, 2.0) : -uniform(rng, 0.5, 2.0);
            break;
        }
        case Recipe::haar: {
            int k = uniform_int(rng, 1, 6);
            for (int j = 0; j < k; ++j) {
                int levels = std::max(1, static_cast<int>(std::log2(std::max(2, space.shape[0]))));
                int lev = uniform_int(rng, 0, levels - 1);
                int len = std::max(2, space.shape[0] >> lev);
                int start = uniform_int(rng, 0, std::max(0, space.shape[0] / len - 1)) * len;
                double amp = uniform(rng, -1.0, 1.0);
                for (int i = 0; i < n; ++i) {
                    int x = i % space.shape[0];
                    if (x < start || x >= start + len) continue;
                    f[static_cast<size_t>(i)] += x < start + len / 2 ? amp : -amp;
                }
            }
            break;
        }
        case Recipe::bumps: {
            int k = uniform_int(rng, 1, 4);
            for (int j = 0; j < k; ++j) {
                double cx = uniform(rng, 0.0, 1.0), cy = uniform(rng, 0.0, 1.0);
                double w = std::exp(uniform(rng, std::log(0.01), std::log(0.3)));
                double amp = uniform(rng, -1.0, 1.0);
                for (int i = 0; i < n; ++i) {
                    auto c = unit_coord(space, i);
                    double d2 = (c[0] - cx) * (c[0] - cx) + (space.dim == 2 ? (c[1] - cy) * (c[1] - cy) : 0.0);
                    f[static_cast<size_t>(i)] += amp * std::exp(-d2 / (2.0 * w * w));
                }
            }
            break;
        }
        case Recipe::noise: {
            std::normal_distribution<double> g(0.0, 1.0);
            for (auto& v : f) v = g(rng);
            break;
        }
        case Recipe::mixed:
            return random_function(static_cast<Recipe>(uniform_int(rng, 0, 3)), space, rng);
    }
    bool any = false;
    for (double v : f) any = any || v != 0.0;
    if (!any) f[static_cast<size_t>(uniform_int(rng, 0, n - 1))] = 1.0;
    return f;
}

GridFunction corpus_function(Recipe recipe, const DiscreteSpace& space, std::uint64_t seed, std::uint64_t index) {
    std::mt19937_64 rng(derive_seed(seed, index));
    if (recipe == Recipe::mixed) recipe = static_cast<Recipe>(splitmix64(index ^ 0x2545f4914f6cdd1dULL) % 4);
    return random_function(recipe, space, rng);
}

GridFunction power_weight(const DiscreteSpace& space, double a, double x0) {
    GridFunction w(static_cast<size_t>(space.size()));
    for (int i = 0; i < space.size(); ++i) {
        double d = std::abs(unit_coord(space, i)[0] - x0);
        w[static_cast<size_t>(i)] = std::pow(d, a);
    }
    return w;
}

GridFunction random_weight(const DiscreteSpace& space, std::mt19937_64& rng) {
    const int n = space.size();
    GridFunction w(static_cast<size_t>(n), 1.0);
    int kind = uniform_int(rng, 0, 2);
    if (kind == 0) {
        double a = uniform(rng, -0.6, 0.9);
        double x0 = uniform(rng, 0.0, 1.0);
        w = power_weight(space, a, x0);
    } else if (kind == 1) {
        std::normal_distribution<double> g(0.0, 0.5);
        for (auto& v : w) v = std::exp(g(rng));
    } else {
        // dyadic product weight
        int len = space.shape[0];
        while (len > 1) {
            for (int s = 0; s < space.shape[0]; s += len) {
                double fac = std::exp(uniform(rng, -0.3, 0.3));
                for (int i = 0; i < n; ++i) {
                    int x = i % space.shape[0];
                    if (x >= s && x < s + len / 2) w[static_cast<size_t>(i)] *= fac;
                    else if (x >= s + len / 2 && x < s + len) w[static_cast<size_t>(i)] /= fac;
                }
            }
            len /= 2;
        }
    }
    return w;
}

}  // namespace sparselab
