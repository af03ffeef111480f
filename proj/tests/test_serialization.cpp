#include "error.hpp"
#include "oracles.hpp"
#include "serialization.hpp"
#include "test_util.hpp"

#include <fstream>

using namespace segedit;

namespace {

const ToyGenerator& gen() {
    static const ToyGenerator g{GeneratorConfig{}};
    return g;
}

} // namespace

TEST_CASE("codes round trip in every space") {
    for (auto space : {LatentSpace::Z, LatentSpace::W, LatentSpace::WPlus, LatentSpace::SSpace}) {
        const auto c = oracle::random_code(gen(), space, 8);
        const auto j = code_to_json(c, gen());
        CHECK(j.at("space") == std::string(to_string(space)));
        CHECK(code_from_json(json::parse(j.dump()), gen()) == c);
    }
}

TEST_CASE("codes are tied to the generator seed and shape") {
    const auto c = oracle::random_code(gen(), LatentSpace::W, 1);
    auto j = code_to_json(c, gen());
    GeneratorConfig other;
    other.seed = 99;
    CHECK_ERROR_CODE(code_from_json(j, ToyGenerator{other}), ErrorCode::SeedMismatch);
    j["payload"].erase(0);
    CHECK_ERROR_CODE(code_from_json(j, gen()), ErrorCode::DimensionMismatch);
    CHECK_ERROR_CODE(code_from_json(json{{"space", "W"}}, gen()), ErrorCode::InvalidArgument);
}

TEST_CASE("projection files round trip") {
    ProjectionFile f;
    f.generator_seed = gen().config().seed;
    f.space = LatentSpace::WPlus;
    f.config.space = LatentSpace::WPlus;
    f.config.steps = 12;
    f.config.seed = 5;
    for (int k = 1; k <= 2; ++k) {
        SegmentProjection p;
        p.segment_id = k;
        p.code = oracle::random_code(gen(), LatentSpace::WPlus, k);
        p.loss_history = {0.5, 0.25, 0.125};
        p.final_loss = 0.125;
        f.segments.push_back(p);
    }
    f.segments[1].fine_tuned_weights = gen().tunable_weights();
    const auto back = projection_file_from_json(json::parse(projection_file_to_json(f, gen()).dump()), gen());
    CHECK(back.generator_seed == f.generator_seed);
    CHECK(back.space == f.space);
    CHECK(back.config.steps == 12);
    CHECK(back.config.seed == 5);
    REQUIRE(back.segments.size() == 2);
    for (int i = 0; i < 2; ++i) {
        CHECK(back.segments[i].segment_id == f.segments[i].segment_id);
        CHECK(back.segments[i].code == f.segments[i].code);
        CHECK(back.segments[i].loss_history == f.segments[i].loss_history);
        CHECK(back.segments[i].final_loss == f.segments[i].final_loss);
        CHECK(back.segments[i].fine_tuned_weights == f.segments[i].fine_tuned_weights);
    }
}

TEST_CASE("directions and scripts") {
    TempDir dir("serialization");
    const auto d = random_direction(gen(), LatentSpace::SSpace, 1, "smile");
    const auto j = direction_to_json(d);
    CHECK(j.at("name") == "smile");
    const auto back = direction_from_json(j, gen());
    CHECK(back.name == "smile");
    CHECK(back.vector == d.vector);
    write_json_file(j, dir / "smile.json");

    const json script = json::parse(R"([
        {"segments": "ALL", "direction": "smile.json", "alpha": 1.5},
        {"segments": [2, 1], "direction": )" + j.dump() + R"(, "alpha": -0.5, "reproject": false}
    ])");
    const auto steps = script_from_json(script, gen(), dir.path);
    REQUIRE(steps.size() == 2);
    CHECK_FALSE(steps[0].segments.has_value());
    CHECK(steps[0].alpha == 1.5);
    CHECK(steps[0].reproject);
    CHECK(steps[0].direction.vector == d.vector);
    REQUIRE(steps[1].segments.has_value());
    CHECK(*steps[1].segments == std::vector<int>{2, 1});
    CHECK_FALSE(steps[1].reproject);

    const auto again = script_from_json(script_to_json(steps), gen(), dir.path);
    REQUIRE(again.size() == 2);
    CHECK(again[1].alpha == -0.5);
    CHECK(again[1].direction.vector == d.vector);

    CHECK_THROWS_AS(script_from_json(json::parse(R"([{"segments": "ALL", "direction": "nope.json", "alpha": 1}])"),
                                     gen(), dir.path),
                    Error);
    CHECK_THROWS_AS(script_from_json(json::parse(R"({"not": "an array"})"), gen(), dir.path), Error);
    json zero = j;
    for (auto& row : zero["payload"])
        for (auto& v : row)
            v = 0.0;
    CHECK_THROWS_AS(direction_from_json(zero, gen()), Error);
}

TEST_CASE("json files") {
    TempDir dir("json");
    CHECK_ERROR_CODE(read_json_file(dir / "missing.json"), ErrorCode::Io);
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK_ERROR_CODE(read_json_file(dir / "bad.json"), ErrorCode::InvalidArgument);
    write_json_file(json{{"a", 1}}, dir / "ok.json");
    CHECK(read_json_file(dir / "ok.json").at("a") == 1);
}
