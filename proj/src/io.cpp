#include "sparselab/io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "sparselab/random.hpp"

namespace sparselab {

using nlohmann::json;

std::string fmt12(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
    if (!j.is_object()) throw ConfigError(where + ": expected an object");
    for (const auto& [k, v] : j.items()) {
        (void)v;
        if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) throw ConfigError(where + ": unknown key '" + k + "'");
    }
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open " + path.string());
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
}

std::string digest(const json& j) { return digest_bytes(j.dump()); }

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

std::string digest_bytes(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

void write_atomic(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw std::runtime_error("cannot write " + tmp.string());
        out << content;
        if (!out) throw std::runtime_error("write failed: " + tmp.string());
    }
    std::filesystem::rename(tmp, path);
}

namespace {

const char* kColors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf"};

std::string esc(const std::string& s) {
    std::string o;
    for (char c : s) {
        if (c == '<') o += "&lt;";
        else if (c == '>') o += "&gt;";
        else if (c == '&') o += "&amp;";
        else o += c;
    }
    return o;
}

}  // namespace

std::string svg_plot(const PlotSpec& spec) {
    const double W = 640, H = 420, L = 70, R = 20, T = 40, B = 50;
    auto tx = [&](double v) { return spec.logx ? std::log10(v) : v; };
    auto ty = [&](double v) { return spec.logy ? std::log10(v) : v; };
    auto usable = [&](double x, double y) {
        return std::isfinite(x) && std::isfinite(y) && (!spec.logx || x > 0) && (!spec.logy || y > 0);
    };
    double x0 = INFINITY, x1 = -INFINITY, y0 = INFINITY, y1 = -INFINITY;
    for (const auto& s : spec.series)
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            x0 = std::min(x0, tx(s.x[i]));
            x1 = std::max(x1, tx(s.x[i]));
            y0 = std::min(y0, ty(s.y[i]));
            y1 = std::max(y1, ty(s.y[i]));
        }
    if (!(x0 <= x1)) x0 = 0, x1 = 1;
    if (!(y0 <= y1)) y0 = 0, y1 = 1;
    if (x1 - x0 < 1e-300) x0 -= 0.5, x1 += 0.5;
    if (y1 - y0 < 1e-300) y0 -= 0.5, y1 += 0.5;
    auto px = [&](double v) { return L + (tx(v) - x0) / (x1 - x0) * (W - L - R); };
    auto py = [&](double v) { return H - B - (ty(v) - y0) / (y1 - y0) * (H - T - B); };

    std::ostringstream os;
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << esc(spec.title) << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    auto lab = [&](double v, bool lg) { return fmt12(lg ? std::pow(10.0, v) : v); };
    for (int k = 0; k <= 4; ++k) {
        double fx = x0 + (x1 - x0) * k / 4.0, fy = y0 + (y1 - y0) * k / 4.0;
        double sx = L + (W - L - R) * k / 4.0, sy = H - B - (H - T - B) * k / 4.0;
        os << "<text x=\"" << sx << "\" y=\"" << H - B + 16 << "\" text-anchor=\"middle\">" << lab(fx, spec.logx).substr(0, 8) << "</text>\n";
        os << "<text x=\"" << L - 6 << "\" y=\"" << sy + 4 << "\" text-anchor=\"end\">" << lab(fy, spec.logy).substr(0, 8) << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">" << esc(spec.xlabel) << "</text>\n";
    os << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << (T + H - B) / 2 << ")\">"
       << esc(spec.ylabel) << "</text>\n";
    for (size_t si = 0; si < spec.series.size(); ++si) {
        const auto& s = spec.series[si];
        const char* col = kColors[si % 6];
        std::ostringstream pts;
        for (size_t i = 0; i < s.x.size() && i < s.y.size(); ++i) {
            if (!usable(s.x[i], s.y[i])) continue;
            pts << fmt12(px(s.x[i])) << ',' << fmt12(py(s.y[i])) << ' ';
            if (s.points) os << "<circle cx=\"" << fmt12(px(s.x[i])) << "\" cy=\"" << fmt12(py(s.y[i])) << "\" r=\"3\" fill=\"" << col << "\"/>\n";
        }
        if (!s.points) os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"1.5\" points=\"" << pts.str() << "\"/>\n";
        os << "<text x=\"" << W - R - 4 << "\" y=\"" << T + 14 * (si + 1) << "\" text-anchor=\"end\" fill=\"" << col << "\">" << esc(s.label)
           << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

namespace {

std::vector<double> masses_from(const json& j, const std::string& key, int n) {
    if (!j.contains(key) || (j[key].is_string() && j[key] == "uniform")) return std::vector<double>(static_cast<size_t>(n), 1.0 / n);
    auto m = j[key].get<std::vector<double>>();
    if (static_cast<int>(m.size()) != n) throw ConfigError("masses: expected " + std::to_string(n) + " entries");
    return m;
}

double num_or(const json& j, const char* key, double dflt) {
    if (!j.contains(key)) return dflt;
    if (!j[key].is_number()) throw ConfigError(std::string(key) + ": expected a number");
    return j[key].get<double>();
}

}  // namespace

DiscreteSpace space_from_json(const json& j) {
    check_keys(j, {"n", "masses", "shape"}, "space");
    if (j.value("shape", std::string("line")) == "lattice2d") return DiscreteSpace::lattice2d(j.at("n").get<int>());
    int n = j.at("n").get<int>();
    if (n < 1) throw ConfigError("space: n must be positive");
    return DiscreteSpace::line(masses_from(j, "masses", n));
}

BallBasis basis_from_config(const json& j) {
    try {
        const std::string kind = j.at("kind").get<std::string>();
        if (kind == "dyadic") {
            check_keys(j, {"kind", "depth", "masses", "include_root"}, "basis");
            int depth = j.at("depth").get<int>();
            if (depth < 0 || depth > 20) throw ConfigError("basis: dyadic depth must be in [0, 20]");
            return build_dyadic_basis(depth, masses_from(j, "masses", 1 << depth), j.value("include_root", true));
        }
        if (kind == "intervals") {
            check_keys(j, {"kind", "n", "kappa", "masses"}, "basis");
            int n = j.at("n").get<int>();
            return build_interval_basis(n, masses_from(j, "masses", n), j.at("kappa").get<double>());
        }
        if (kind == "rect2d") {
            check_keys(j, {"kind", "n"}, "basis");
            return build_rect2d_candidate(j.at("n").get<int>());
        }
        if (kind == "refined_dyadic") {
            check_keys(j, {"kind", "levels"}, "basis");
            return build_refined_dyadic_basis(j.at("levels").get<int>());
        }
        if (kind == "file") {
            check_keys(j, {"kind", "path"}, "basis");
            return basis_from_json(load_json(j.at("path").get<std::string>()));
        }
        throw ConfigError("basis: unknown kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("basis: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("basis: ") + e.what());
    }
}

GridFunction weight_from_json(const json& j, const BallBasis& basis) {
    const auto& sp = basis.space;
    const int n = sp.size();
    try {
        const std::string kind = j.at("kind").get<std::string>();
        GridFunction w;
        if (kind == "constant") {
            check_keys(j, {"kind", "value", "name"}, "weight");
            w.assign(static_cast<size_t>(n), num_or(j, "value", 1.0));
        } else if (kind == "power") {
            check_keys(j, {"kind", "a", "x0", "name"}, "weight");
            w = power_weight(sp, j.at("a").get<double>(), num_or(j, "x0", 0.5));
        } else if (kind == "shell_power") {
            check_keys(j, {"kind", "a", "name"}, "weight");
            w = shell_power_weight(basis, j.at("a").get<double>());
        } else if (kind == "step") {
            // value[k] on [breaks[k-1], breaks[k]) in unit coordinates
            check_keys(j, {"kind", "breaks", "values", "name"}, "weight");
            auto br = j.at("breaks").get<std::vector<double>>();
            auto vals = j.at("values").get<std::vector<double>>();
            if (vals.size() != br.size() + 1) throw ConfigError("weight step: need one more value than breaks");
            w.resize(static_cast<size_t>(n));
            const int nx = sp.shape[0];
            for (int i = 0; i < n; ++i) {
                double x = (i % nx + 0.5) / nx;
                size_t k = static_cast<size_t>(std::upper_bound(br.begin(), br.end(), x) - br.begin());
                w[static_cast<size_t>(i)] = vals[k];
            }
        } else if (kind == "random") {
            check_keys(j, {"kind", "seed", "name"}, "weight");
            std::mt19937_64 rng(j.at("seed").get<std::uint64_t>());
            w = random_weight(sp, rng);
        } else if (kind == "values") {
            check_keys(j, {"kind", "values", "name"}, "weight");
            w = j.at("values").get<std::vector<double>>();
        } else if (kind == "csv") {
            check_keys(j, {"kind", "path", "name"}, "weight");
            std::ifstream in(j.at("path").get<std::string>());
            if (!in) throw ConfigError("weight csv: cannot open file");
            w.assign(static_cast<size_t>(n), NAN);
            std::string line;
            while (std::getline(in, line)) {
                if (line.empty() || line[0] == '#' || !(std::isdigit(static_cast<unsigned char>(line[0])))) continue;
                int idx;
                double v;
                if (std::sscanf(line.c_str(), "%d,%lf", &idx, &v) != 2 || idx < 0 || idx >= n) throw ConfigError("weight csv: bad row '" + line + "'");
                w[static_cast<size_t>(idx)] = v;
            }
        } else {
            throw ConfigError("weight: unknown kind '" + kind + "'");
        }
        if (static_cast<int>(w.size()) != n) throw ConfigError("weight: expected " + std::to_string(n) + " values");
        for (double v : w)
            if (!(v > 0.0) || !std::isfinite(v)) throw ConfigError("weight: values must be finite and positive");
        return w;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("weight: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("weight: ") + e.what());
    }
}

GridFunction symbol_from_json(const json& j, const DiscreteSpace& sp) {
    const int n = sp.size();
    const int nx = sp.shape[0];
    auto ux = [&](int i) { return (i % nx + 0.5) / nx; };
    try {
        const std::string kind = j.at("kind").get<std::string>();
        GridFunction b(static_cast<size_t>(n));
        if (kind == "log") {
            check_keys(j, {"kind", "x0"}, "symbol");
            double x0 = num_or(j, "x0", 0.5);
            for (int i = 0; i < n; ++i) b[static_cast<size_t>(i)] = std::log(std::max(std::abs(ux(i) - x0), 1e-12));
        } else if (kind == "lipschitz") {
            // tent of height `radius` around `center`
            check_keys(j, {"kind", "center", "radius"}, "symbol");
            double c = num_or(j, "center", 0.5), r = num_or(j, "radius", 0.2);
            for (int i = 0; i < n; ++i) b[static_cast<size_t>(i)] = std::max(0.0, r - std::abs(ux(i) - c));
        } else if (kind == "lacunary_steps") {
            // parity of the dyadic shell index around x0
            check_keys(j, {"kind", "x0"}, "symbol");
            double x0 = num_or(j, "x0", 0.5);
            for (int i = 0; i < n; ++i) {
                double d = std::max(std::abs(ux(i) - x0), 1e-12);
                b[static_cast<size_t>(i)] = std::fmod(std::floor(std::log2(1.0 / d)), 2.0);
            }
        } else if (kind == "values") {
            check_keys(j, {"kind", "values"}, "symbol");
            b = j.at("values").get<std::vector<double>>();
            if (static_cast<int>(b.size()) != n) throw ConfigError("symbol: expected " + std::to_string(n) + " values");
        } else {
            throw ConfigError("symbol: unknown kind '" + kind + "'");
        }
        return b;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("symbol: ") + e.what());
    }
}

json RunManifest::to_json() const {
    return json{{"command", command},       {"config", config},           {"config_digest", config_digest},
                {"seed", seed},             {"outputs", outputs},         {"output_digests", output_digests},
                {"exit_code", exit_code},   {"wall_seconds", wall_seconds}, {"version", version}};
}

RunManifest RunManifest::from_json(const json& j) {
    try {
        check_keys(j, {"command", "config", "config_digest", "seed", "outputs", "output_digests", "exit_code", "wall_seconds", "version"}, "manifest");
        RunManifest m;
        m.command = j.at("command").get<std::string>();
        m.config = j.at("config");
        m.config_digest = j.at("config_digest").get<std::string>();
        m.seed = j.at("seed").get<std::uint64_t>();
        m.outputs = j.at("outputs").get<std::vector<std::string>>();
        m.output_digests = j.at("output_digests").get<std::map<std::string, std::string>>();
        m.exit_code = j.value("exit_code", 0);
        m.wall_seconds = j.value("wall_seconds", 0.0);
        m.version = j.value("version", std::string());
        return m;
    } catch (const json::exception& e) {
        throw ConfigError(std::string("manifest: ") + e.what());
    }
}

}  // namespace sparselab
