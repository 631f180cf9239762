#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tracks/config.hpp"
#include "tracks/errors.hpp"

using namespace tracks;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("tracks_cfg_" + std::to_string(::getpid()));
        fs::remove_all(path);
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string write(const std::string& name, const std::string& text) const {
        std::ofstream(path / name) << text;
        return (path / name).string();
    }
};

std::string error_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST_CASE("defaults validate and map onto the experiment") {
    Config c;
    const auto e = c.to_experiment();
    CHECK(e.scenario == ScenarioKind::Case1);
    CHECK(e.topology == TopologyKind::Dumbbell);
    CHECK(e.incast.n_small == 20);
    CHECK(e.incast.rounds == 5);
    CHECK(e.tcp.rto_min == 200 * kMsec);
    CHECK(e.tcp.init_cwnd == 10);
    CHECK(e.shim_enabled);
    CHECK(e.shim.alpha == 10);
    CHECK(e.shim.gamma == kGammaInfinite);
    CHECK(e.shim.phi == 3);
    CHECK(e.deadline == 200 * kMsec);
    CHECK(c.items().size() == config_keys().size());
    for (const auto& k : config_keys()) CHECK(c.get(k.name) == k.default_value);
}

TEST_CASE("scenario choices pick the matching topology") {
    Config c;
    c.set("scenario", "poisson");
    CHECK(c.to_experiment().topology == TopologyKind::LeafSpine);
    c.set("topology", "dumbbell");
    CHECK_THROWS_AS(c.to_experiment(), ConfigError);
    Config d;
    d.set("scenario", "case2");
    CHECK(d.to_experiment().incast.with_large);
    d.set("gamma", "100000");
    CHECK(d.to_experiment().shim.gamma == 100000);
}

TEST_CASE("bad keys and values are rejected") {
    Config c;
    CHECK_THROWS_AS(c.set("no_such_key", "1"), ConfigError);
    for (auto [k, v] : std::vector<std::pair<const char*, const char*>>{{"flows", "abc"},
                                                                       {"flows", "-3"},
                                                                       {"load", "1.2"},
                                                                       {"tcp", "cubic"},
                                                                       {"aqm", "codel"},
                                                                       {"shim", "maybe"},
                                                                       {"rtt_us", "0"},
                                                                       {"workload", "nonexistent"}}) {
        CAPTURE(k);
        Config bad;
        if (std::string(k) == "load" || std::string(k) == "workload") bad.set("scenario", "poisson");
        bad.set(k, v);
        CHECK_THROWS_AS(bad.to_experiment(), ConfigError);
    }
    CHECK(parse_bool("x", "off") == false);
    CHECK(parse_bool("x", "yes") == true);
    CHECK_THROWS_AS(parse_bool("x", "2"), ConfigError);
}

TEST_CASE("config files: comments, include, diagnostics") {
    TempDir t;
    fs::create_directories(t.path / "sub");
    t.write("sub/base.conf", "# shared\nflows = 40\nseed=9\n");
    const auto main = t.write("main.conf", "include sub/base.conf\n\nseed = 11  # override\ntcp = dctcp\n");
    Config c;
    c.load_file(main);
    CHECK(c.get("flows") == "40");
    CHECK(c.get("seed") == "11");
    CHECK(c.get("tcp") == "dctcp");

    const auto unknown = t.write("u.conf", "flows = 3\nfloows = 4\n");
    CHECK(error_of([&] { Config().load_file(unknown); }).find("u.conf:2") != std::string::npos);
    const auto noeq = t.write("n.conf", "flows 3\n");
    CHECK(error_of([&] { Config().load_file(noeq); }).find("n.conf:1") != std::string::npos);
    const auto loop = t.write("loop.conf", "include loop.conf\n");
    CHECK_THROWS_AS(Config().load_file(loop), ConfigError);
    CHECK_THROWS_AS(Config().load_file((t.path / "missing.conf").string()), ConfigError);
}

TEST_CASE("config hash tracks values but not the data directory") {
    Config a, b;
    CHECK(a.hash() == b.hash());
    b.set("seed", "2");
    CHECK(a.hash() != b.hash());
    b.set("seed", "1");
    CHECK(a.hash() == b.hash());
    b.set("workload_dir", "/elsewhere");
    CHECK(a.hash() == b.hash());
}
