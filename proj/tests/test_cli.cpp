#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kTmp = fs::temp_directory_path() / "sparselab_cli_test";

int run(const std::string& args, const std::string& env = "") {
    std::string cmd = env + (env.empty() ? "" : " ") + "\"" + SPARSELAB_CLI_PATH + "\" " + args + " > /dev/null 2>&1";
    int rc = std::system(cmd.c_str());
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string config(const std::string& name) { return std::string(SPARSELAB_CONFIG_DIR) + "/" + name; }

fs::path fresh(const std::string& name) {
    fs::path p = kTmp / name;
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

nlohmann::json manifest(const fs::path& dir) { return nlohmann::json::parse(slurp(dir / "manifest.json")); }

fs::path write_config(const std::string& name, const std::string& text) {
    fs::create_directories(kTmp);
    fs::path p = kTmp / name;
    std::ofstream(p) << text;
    return p;
}

}  // namespace

TEST_CASE("verify-basis exit codes") {
    fs::path d = fresh("dyadic");
    CHECK(run("verify-basis --config " + config("verify_dyadic.json") + " --out " + d.string()) == 0);
    auto ax = nlohmann::json::parse(slurp(d / "axioms.json"));
    CHECK(ax.at("b4_pass") == true);
    CHECK(manifest(d).at("exit_code") == 0);

    fs::path r = fresh("rect");
    CHECK(run("verify-basis --config " + config("verify_rect2d.json") + " --out " + r.string()) == 0);
    CHECK(nlohmann::json::parse(slurp(r / "axioms.json")).at("b4_pass") == false);

    fs::path k = fresh("k2");
    CHECK(run("verify-basis --config " + config("verify_interval_k2.json") + " --out " + k.string()) == 1);
    CHECK(manifest(k).at("exit_code") == 1);
}

TEST_CASE("config errors exit with 2") {
    fs::path d = fresh("bad");
    fs::path bad = write_config("bad.json", R"({"basis": {"kind": "dyadic", "depth": 4}, "colour": 1})");
    CHECK(run("verify-basis --config " + bad.string() + " --out " + d.string()) == 2);
    CHECK(run("verify-basis --config " + (kTmp / "missing.json").string() + " --out " + d.string()) == 2);
    fs::path badw = write_config("badw.json", R"({"basis": {"kind": "dyadic", "depth": 4}, "weights": {"items": [{"kind": "values", "values": [1, -1]}]}})");
    CHECK(run("weights --config " + badw.string() + " --out " + d.string()) == 2);
    fs::path badx = write_config("badx.json", R"({"basis": {"kind": "dyadic", "depth": 4}, "experiments": [{"type": "decay", "trails": 3}]})");
    CHECK(run("experiment --config " + badx.string() + " --out " + d.string()) == 2);
    CHECK(run("no-such-command") != 0);
}

TEST_CASE("weights command") {
    fs::path d = fresh("weights");
    CHECK(run("weights --config " + config("weights_corpus.json") + " --out " + d.string()) == 0);
    CHECK(slurp(d / "weights.csv").rfind("weight,quantity,param,value,extremal_ball", 0) == 0);
}

TEST_CASE("sparse-dominate with the global average") {
    fs::path d = fresh("ga");
    CHECK(run("sparse-dominate --config " + config("sparse_global_average.json") + " --out " + d.string()) == 0);
    CHECK(fs::exists(d / "summary.csv"));
    auto s = nlohmann::json::parse(slurp(d / "summary.json"));
    CHECK(s.at("max_constant").get<double>() <= 1 + 1e-12);
}

TEST_CASE("empty experiment list writes only the manifest") {
    fs::path d = fresh("empty");
    CHECK(run("experiment --config " + config("experiment_empty.json") + " --out " + d.string()) == 0);
    int n = 0;
    for (const auto& e : fs::directory_iterator(d)) {
        CHECK(e.path().filename() == "manifest.json");
        ++n;
    }
    CHECK(n == 1);
    CHECK(manifest(d).at("outputs").empty());
}

TEST_CASE("outputs do not depend on the thread count and replay") {
    fs::path a = fresh("t1"), b = fresh("t3");
    CHECK(run("experiment --config " + config("experiment_suite.json") + " --threads 1 --out " + a.string()) == 0);
    CHECK(run("experiment --config " + config("experiment_suite.json") + " --threads 3 --out " + b.string()) == 0);
    auto ma = manifest(a), mb = manifest(b);
    REQUIRE_FALSE(ma.at("outputs").empty());
    CHECK(ma.at("output_digests") == mb.at("output_digests"));
    CHECK(ma.at("config_digest") == mb.at("config_digest"));
    for (const auto& name : ma.at("outputs")) CHECK(slurp(a / name.get<std::string>()) == slurp(b / name.get<std::string>()));

    fs::path r = fresh("replay");
    CHECK(run("replay --config " + (a / "manifest.json").string() + " --out " + r.string()) == 0);
    for (const auto& name : ma.at("outputs")) CHECK(slurp(a / name.get<std::string>()) == slurp(r / name.get<std::string>()));

    fs::path m = fresh("tampered");
    fs::copy(a, m, fs::copy_options::recursive | fs::copy_options::overwrite_existing);
    auto j = manifest(m);
    j["output_digests"][j["outputs"][0].get<std::string>()] = "0000000000000000";
    std::ofstream(m / "manifest.json") << j.dump(2);
    CHECK(run("replay --config " + (m / "manifest.json").string() + " --out " + (m / "again").string()) == 1);
}

TEST_CASE("output directory precedence") {
    fs::path env = fresh("env"), flag = fresh("flag");
    std::string e = "SPARSELAB_OUT_DIR=" + env.string();
    CHECK(run("verify-basis --config " + config("verify_dyadic.json"), e) == 0);
    CHECK(fs::exists(env / "manifest.json"));
    fs::remove(env / "manifest.json");
    CHECK(run("verify-basis --config " + config("verify_dyadic.json") + " --out " + flag.string(), e) == 0);
    CHECK(fs::exists(flag / "manifest.json"));
    CHECK_FALSE(fs::exists(env / "manifest.json"));
}
