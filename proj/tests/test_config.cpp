#include <doctest.h>

#include "grif/config.hpp"

using grif::Config;

TEST_SUITE("config") {

TEST_CASE("typed values parse") {
    Config cfg = Config::parse("align.tau = 0.1\npolicy.mode = frozen\ndata.n_labeled = 42\n");
    CHECK(cfg.get_real("align.tau") == doctest::Approx(0.1));
    CHECK(cfg.get_str("policy.mode") == "frozen");
    CHECK(cfg.get_int("data.n_labeled") == 42);
}

TEST_CASE("empty file resolves to all defaults including warmup 2000") {
    Config cfg = Config::parse("");
    CHECK(cfg.get_int("optim.warmup_steps") == 2000);
    CHECK(cfg.get_int("optim.decay_steps") == 2000000);
    CHECK(cfg.get_real("optim.peak_lr") == doctest::Approx(3e-4));
    CHECK(cfg.get_real("align.tau") == doctest::Approx(0.1));
    CHECK(cfg.get_real("policy.sigma") == doctest::Approx(0.1));
    CHECK(cfg.get_int("data.n_paraphrases") == 5);
    CHECK(cfg.get_real("policy.align_weight") == doctest::Approx(1.0));
}

TEST_CASE("unknown keys are rejected with a line number") {
    try {
        Config::parse("# comment\nalign.tau = 0.2\nnot.a.key = 3\n");
        FAIL("expected throw");
    } catch (const std::runtime_error& e) {
        const std::string msg = e.what();
        CHECK(msg.find("line 3") != std::string::npos);
        CHECK(msg.find("not.a.key") != std::string::npos);
    }
}

TEST_CASE("type and enum errors carry line numbers") {
    try {
        Config::parse("align.batch = twelve\n");
        FAIL("expected throw");
    } catch (const std::runtime_error& e) {
        CHECK(std::string(e.what()).find("line 1") != std::string::npos);
    }
    CHECK_THROWS_AS(Config::parse("policy.mode = melted\n"), std::runtime_error);
    CHECK_THROWS_AS(Config::parse("just a line without equals\n"), std::runtime_error);
}

TEST_CASE("resolution is total and hash tracks changes") {
    Config base = Config::parse("");
    Config changed = Config::parse("align.tau = 0.2\n");
    CHECK(base.hash() != changed.hash());
    // Round-trip: parsing the resolved text reproduces the config.
    Config reparsed = Config::parse(changed.resolved_text());
    CHECK(reparsed.hash() == changed.hash());
    CHECK(reparsed.resolved_text() == changed.resolved_text());
}

TEST_CASE("csv splitting") {
    const auto parts = grif::split_csv("a, b ,c,,d");
    REQUIRE(parts.size() == 5);
    CHECK(parts[0] == "a");
    CHECK(parts[1] == "b");
    CHECK(parts[3].empty());
    CHECK(grif::split_csv("").empty());
}

}  // TEST_SUITE
