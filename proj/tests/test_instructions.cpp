#include <doctest.h>

#include <map>
#include <set>

#include "grif/instructions.hpp"
#include "grif/sim.hpp"

using namespace grif;

TEST_SUITE("instructions") {

TEST_CASE("tokenize known template") {
    const auto ids = lang::tokenize("put the pepper on the pan");
    REQUIRE(ids.size() == 6);
    for (int id : ids) CHECK(id != lang::kUnkId);
}

TEST_CASE("unknown words map to UNK") {
    const auto ids = lang::tokenize("put the zebra on the pan");
    CHECK(ids[2] == lang::kUnkId);
    CHECK(ids[0] != lang::kUnkId);
}

TEST_CASE("empty instruction is an error") {
    CHECK_THROWS_AS(lang::tokenize(""), std::invalid_argument);
    CHECK_THROWS_AS(lang::tokenize("   "), std::invalid_argument);
}

TEST_CASE("templates per task kind") {
    sim::TaskSpec place;
    place.kind = sim::TaskKind::place_on;
    place.subject = static_cast<uint8_t>(sim::ObjectType::pepper);
    place.target_type = static_cast<uint8_t>(sim::ObjectType::pan);
    CHECK(lang::make_instruction(place) == "put the pepper on the pan");

    sim::TaskSpec dir;
    dir.kind = sim::TaskKind::move_dir;
    dir.subject = static_cast<uint8_t>(sim::ObjectType::towel);
    dir.direction = static_cast<uint8_t>(sim::Direction::left);
    CHECK(lang::make_instruction(dir) == "move the towel to the left");

    sim::TaskSpec rel;
    rel.kind = sim::TaskKind::move_relative;
    rel.subject = static_cast<uint8_t>(sim::ObjectType::knife);
    rel.ref_type = static_cast<uint8_t>(sim::ObjectType::pot);
    rel.relation = static_cast<uint8_t>(sim::Relation::next_to);
    CHECK(lang::make_instruction(rel) == "place the knife next to the pot");
    rel.relation = static_cast<uint8_t>(sim::Relation::in_front_of);
    CHECK(lang::make_instruction(rel) == "place the knife in front of the pot");
}

TEST_CASE("synonym substitution example") {
    const auto variants = lang::paraphrases("put the pepper on the pan");
    CHECK(variants[0] == "place the pepper on the pan");
}

TEST_CASE("exactly five distinct paraphrases per instruction") {
    // Every canonical instruction over every scene in the library.
    for (const auto& spec : sim::scene_library()) {
        for (const auto& task : sim::enumerate_tasks(spec)) {
            const std::string canonical = lang::make_instruction(task);
            const auto variants = lang::paraphrases(canonical);
            std::set<std::string> distinct(variants.begin(), variants.end());
            distinct.insert(canonical);
            CHECK(distinct.size() == 6);
        }
    }
}

TEST_CASE("tokenize is injective on the full instruction set") {
    std::map<std::vector<int>, std::string> seen;
    std::set<std::string> instructions;
    for (const auto& spec : sim::scene_library())
        for (const auto& task : sim::enumerate_tasks(spec)) {
            const std::string canonical = lang::make_instruction(task);
            instructions.insert(canonical);
            for (const auto& v : lang::paraphrases(canonical)) instructions.insert(v);
        }
    for (const auto& s : instructions) {
        const auto ids = lang::tokenize(s);
        for (int id : ids) CHECK(id != lang::kUnkId);
        auto [it, inserted] = seen.emplace(ids, s);
        if (!inserted) {
            CAPTURE(s);
            CAPTURE(it->second);
            CHECK(inserted);
        }
    }
}

TEST_CASE("distinct tasks have distinct token multisets (mean-pool safety)") {
    // Mean pooling is order-insensitive, so canonical instructions of
    // different tasks must differ as bags of tokens.
    std::map<std::multiset<int>, sim::TaskSpec> seen;
    for (const auto& spec : sim::scene_library())
        for (const auto& task : sim::enumerate_tasks(spec)) {
            const auto ids = lang::tokenize(lang::make_instruction(task));
            std::multiset<int> bag(ids.begin(), ids.end());
            auto it = seen.find(bag);
            if (it != seen.end()) {
                CHECK(it->second == task);
            } else {
                seen.emplace(std::move(bag), task);
            }
        }
}

TEST_CASE("sampling covers canonical plus five variants") {
    Rng rng(3);
    std::set<std::string> seen;
    for (int i = 0; i < 200; ++i) seen.insert(lang::sample_instruction("put the pepper on the pan", rng));
    CHECK(seen.size() == 6);
    // n_variants = 0 always returns the canonical string.
    for (int i = 0; i < 10; ++i)
        CHECK(lang::sample_instruction("put the pepper on the pan", rng, 0) == "put the pepper on the pan");
}

TEST_CASE("captions list types in enum order") {
    const std::string cap = lang::caption_for_types({sim::ObjectType::pan, sim::ObjectType::pepper});
    CHECK(cap == "a scene with a pepper and a pan");
    for (int id : lang::tokenize(cap)) CHECK(id != lang::kUnkId);
}

}  // TEST_SUITE
