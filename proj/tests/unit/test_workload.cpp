#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "tracks/errors.hpp"
#include "tracks/workload.hpp"

using namespace tracks;

namespace {

const std::string kDataDir = TRACKS_TEST_DATA_DIR;

// Mean of a piecewise-linear CDF with an atom at the first breakpoint,
// written out term by term from the table rather than through FlowSizeCdf.
double websearch_mean_oracle() {
    const double s[] = {8760, 18980, 27740, 48180, 77380, 194180, 973820, 1946180, 4865180, 9733820, 29200000};
    const double p[] = {0.15, 0.2, 0.3, 0.4, 0.53, 0.6, 0.7, 0.8, 0.9, 0.97, 1.0};
    double m = s[0] * p[0];
    for (int i = 1; i < 11; ++i) m += (p[i] - p[i - 1]) * 0.5 * (s[i] + s[i - 1]);
    return m;
}

}  // namespace

TEST_CASE("CDF parsing rejects malformed input") {
    CHECK_THROWS_AS(FlowSizeCdf::parse(""), ConfigError);
    CHECK_THROWS_AS(FlowSizeCdf::parse("100 0.5\n200 0.9\n"), ConfigError);  // does not reach 1
    CHECK_THROWS_AS(FlowSizeCdf::parse("100 0.5\n50 1\n"), ConfigError);     // size goes back
    CHECK_THROWS_AS(FlowSizeCdf::parse("100 0.5\n200 0.4\n300 1\n"), ConfigError);
    CHECK_THROWS_AS(FlowSizeCdf::parse("100 0.5 7\n200 1\n"), ConfigError);
    CHECK_THROWS_AS(FlowSizeCdf::parse("abc\n"), ConfigError);
    try {
        FlowSizeCdf::parse("# header\n100 0.5\n200\n", "w.cdf");
        FAIL("no throw");
    } catch (const ConfigError& e) {
        CHECK(std::string(e.what()).find("w.cdf:3") != std::string::npos);
    }
    const auto c = FlowSizeCdf::parse("# c\n100 0.5 # trailing\n\n300 1\n");
    CHECK(c.points().size() == 2);
}

TEST_CASE("inverse CDF endpoints and interpolation") {
    const auto c = FlowSizeCdf::parse("100 0.5\n300 1\n");
    CHECK(c.inverse(0.0) == 100);
    CHECK(c.inverse(0.5) == 100);
    CHECK(c.inverse(0.75) == doctest::Approx(200));
    CHECK(c.inverse(1.0) == 300);
    CHECK(c.mean() == doctest::Approx(0.5 * 100 + 0.5 * 200));
}

TEST_CASE("websearch sample mean matches the analytic mean") {
    const auto c = FlowSizeCdf::load_file(kDataDir + "/websearch.cdf");
    const double oracle = websearch_mean_oracle();
    CHECK(c.mean() == doctest::Approx(oracle).epsilon(1e-12));
    CHECK(c.inverse(1.0) == 29'200'000);
    RngStream rng(42);
    double sum = 0;
    const int n = 1'000'000;
    for (int i = 0; i < n; ++i) sum += static_cast<double>(c.sample(rng));
    CHECK(std::fabs(sum / n - oracle) / oracle < 0.02);
}

TEST_CASE("all bundled workloads load") {
    for (const char* w : {"websearch", "datamining", "educational", "privatedc"}) {
        CAPTURE(w);
        const auto c = FlowSizeCdf::load_file(kDataDir + "/" + w + ".cdf");
        CHECK(c.mean() > 0);
        CHECK(c.points().back().second == 1.0);
    }
}

TEST_CASE("incast schedule shape") {
    IncastSpec spec;
    spec.n_small = 20;
    spec.rounds = 5;
    const auto flows = gen_incast_schedule(spec, 20, RngFactory(7));
    REQUIRE(flows.size() == 100);
    std::map<std::uint32_t, std::vector<HostId>> by_round;
    for (std::size_t i = 0; i < flows.size(); ++i) {
        const auto& f = flows[i];
        CHECK(f.flow_id == i);
        CHECK(f.dst == 20);
        CHECK(f.size_bytes == 14'600);
        CHECK(f.start >= static_cast<SimTime>(f.round) * 3 * kSec);
        CHECK(f.start < static_cast<SimTime>(f.round) * 3 * kSec + 10 * kMsec);
        by_round[f.round].push_back(f.src);
    }
    CHECK(by_round.size() == 5);
    for (auto& [r, srcs] : by_round) {
        std::sort(srcs.begin(), srcs.end());
        for (HostId h = 0; h < 20; ++h) CHECK(srcs[h] == h);  // each sender once per round
    }
    // same seed, same schedule; different seed, different order
    const auto again = gen_incast_schedule(spec, 20, RngFactory(7));
    const auto other = gen_incast_schedule(spec, 20, RngFactory(8));
    bool differs = false;
    for (std::size_t i = 0; i < flows.size(); ++i) {
        CHECK(again[i].start == flows[i].start);
        CHECK(again[i].src == flows[i].src);
        differs |= other[i].start != flows[i].start || other[i].src != flows[i].src;
    }
    CHECK(differs);
}

TEST_CASE("incast with large flows") {
    IncastSpec spec;
    spec.n_small = 20;
    spec.rounds = 2;
    spec.with_large = true;
    CHECK(spec.n_large() == 7);  // ceil(20 / 3)
    CHECK(spec.n_senders() == 27);
    const auto flows = gen_incast_schedule(spec, 27, RngFactory(1));
    REQUIRE(flows.size() == 7 + 40);
    for (std::uint32_t i = 0; i < 7; ++i) {
        CHECK(flows[i].persistent());
        CHECK(flows[i].start == 0);
        CHECK(flows[i].src == 20 + i);
    }
    for (std::size_t i = 7; i < flows.size(); ++i) CHECK(flows[i].src < 20);
}

TEST_CASE("Poisson arrival rate scales with load") {
    const double C = 36e9, m = 1.6e6;
    CHECK(poisson_rate(0.9, C, m) / poisson_rate(0.3, C, m) == doctest::Approx(3.0));
    CHECK(poisson_rate(0.5, C, m) == doctest::Approx(0.5 * C / (m * 8)));
    CHECK_THROWS_AS(poisson_rate(0.5, C, 0), ConfigError);
}

TEST_CASE("Poisson generator honours load, window and host pairs") {
    const auto cdf = FlowSizeCdf::load_file(kDataDir + "/websearch.cdf");
    LeafSpine topo(LeafSpineSpec{});
    // uplink = 4 hosts * 10G / (5 * 4 spines); capacity = uplink * spines * leaves / 2
    const double capacity = 2e9 * 4 * 9 / 2;
    const double lambda = 0.7 * capacity / (websearch_mean_oracle() * 8);

    PoissonSpec spec;
    spec.load = 0.7;
    spec.window = 10 * kSec;
    const auto flows = gen_poisson_flows(spec, cdf, topo, RngFactory(3));
    REQUIRE(flows.size() > 1000);
    const double mean_gap = static_cast<double>(flows.back().start) / static_cast<double>(flows.size());
    CHECK(std::fabs(mean_gap - 1e6 / lambda) / (1e6 / lambda) < 0.05);
    for (const auto& f : flows) {
        CHECK(f.src != f.dst);
        CHECK(f.dst < 36);
        CHECK(f.start < spec.window);
    }

    spec.load = 0.3;
    const auto low = gen_poisson_flows(spec, cdf, topo, RngFactory(3));
    const double ratio = static_cast<double>(flows.size()) / static_cast<double>(low.size());
    CHECK(ratio == doctest::Approx(0.7 / 0.3).epsilon(0.05));

    spec.pattern = TrafficPattern::OneToAll;
    for (const auto& f : gen_poisson_flows(spec, cdf, topo, RngFactory(3))) {
        CHECK(topo.rack_of(f.src) == 0);
        CHECK(topo.rack_of(f.dst) != 0);
    }

    for (double bad : {0.0, 1.0, -0.2, 1.5}) {
        spec.load = bad;
        CHECK_THROWS_AS(gen_poisson_flows(spec, cdf, topo, RngFactory(3)), ConfigError);
    }
}

TEST_CASE("size classes are inclusive at their limits") {
    CHECK(classify_size(1) == SizeClass::Small);
    CHECK(classify_size(100'000) == SizeClass::Small);
    CHECK(classify_size(100'001) == SizeClass::Medium);
    CHECK(classify_size(10'000'000) == SizeClass::Medium);
    CHECK(classify_size(10'000'001) == SizeClass::Large);
    CHECK(parse_size_class("medium") == SizeClass::Medium);
    CHECK_FALSE(parse_size_class("huge").has_value());
}

TEST_CASE("shuffle is a deterministic permutation") {
    std::vector<int> a(50), b;
    for (int i = 0; i < 50; ++i) a[i] = i;
    b = a;
    RngStream r1(9), r2(9);
    shuffle_in_place(a, r1);
    shuffle_in_place(b, r2);
    CHECK(a == b);
    auto s = a;
    std::sort(s.begin(), s.end());
    for (int i = 0; i < 50; ++i) CHECK(s[i] == i);
}
