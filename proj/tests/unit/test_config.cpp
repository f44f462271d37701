#include "npw/config.hpp"

#include <gtest/gtest.h>

#include <fstream>
#include <sstream>

using namespace npw;

namespace {

json minimal() {
    return json::parse(R"({"schema": 1, "profile": {"name": "zero"}, "data": {"x0": [0, 0], "xdot0": [1, 0]}})");
}

json load(const std::string& name) {
    std::ifstream in(std::string(NPW_CONFIG_DIR) + "/" + name);
    return json::parse(in);
}

}  // namespace

TEST(Config, MinimalDefaults) {
    const ExperimentConfig c = parse_config(minimal());
    EXPECT_EQ(c.manifold, "flat2");
    EXPECT_EQ(c.kernel, "bump");
    EXPECT_EQ(c.realisation, "impulsive");
    EXPECT_EQ(c.solver, "adaptive");
    EXPECT_EQ(c.eps_list.size(), 12u);
    EXPECT_DOUBLE_EQ(c.eps_list.back(), 1.0 / 4096);
    EXPECT_DOUBLE_EQ(c.alpha_b, 1.0);
    EXPECT_DOUBLE_EQ(c.alpha_c, 1.0);
    EXPECT_DOUBLE_EQ(c.data.start_u, -1.0);
    EXPECT_NO_THROW(check_config(c));
}

TEST(Config, RejectsUnknownKeys) {
    for (const char* path : {"/bogus", "/profile/colour", "/data/x1", "/net/width", "/alpha/d", "/stability/eta"}) {
        json j = minimal();
        j[json::json_pointer(path)] = 1;
        EXPECT_THROW(parse_config(j), ConfigError) << path;
    }
}

TEST(Config, RequiresSchemaOne) {
    json j = minimal();
    j.erase("schema");
    EXPECT_THROW(parse_config(j), ConfigError);
    j["schema"] = 2;
    EXPECT_THROW(parse_config(j), ConfigError);
    j["schema"] = "1";
    EXPECT_THROW(parse_config(j), ConfigError);
}

TEST(Config, SemanticErrors) {
    auto bad = [](const std::function<void(json&)>& edit) {
        json j = minimal();
        edit(j);
        return [j] { check_config(parse_config(j)); };
    };
    EXPECT_THROW(bad([](json& j) { j["eps"] = 0; })(), ConfigError);
    EXPECT_THROW(bad([](json& j) { j["eps_list"] = {0.5, 2.0}; })(), ConfigError);
    EXPECT_THROW(bad([](json& j) { j["tol"] = -1; })(), ConfigError);
    EXPECT_THROW(bad([](json& j) { j["data"]["x0"] = {1}; })(), ConfigError);
    EXPECT_THROW(bad([](json& j) { j["manifold"] = "torus"; })(), ConfigError);
    EXPECT_THROW(bad([](json& j) { j["profile"]["name"] = "nope"; })(), ConfigError);
    EXPECT_THROW(bad([](json& j) { j["net"] = {{"kernel", "box"}}; })(), ConfigError);
    EXPECT_THROW(bad([](json& j) { j["alpha"] = {{"b", 0}}; })(), ConfigError);
    EXPECT_THROW(bad([](json& j) { j["solver"] = "euler"; })(), ConfigError);
    EXPECT_THROW(bad([](json& j) { j["jobs"] = 0; })(), ConfigError);
    EXPECT_THROW(bad([](json& j) { j["seed"] = -3; })(), ConfigError);
    EXPECT_THROW(bad([](json& j) { j["vacuum"] = {{"box", {{1, 0}, {0, 1}}}}; })(), ConfigError);
}

TEST(Config, RoundTripPreservesHash) {
    for (const char* name : {"flat_zero.json", "harmonic2.json", "gaussian.json", "homog3.json", "half_plane.json",
                             "stability.json", "vacuum.json", "nets.json"}) {
        const ExperimentConfig c = parse_config(load(name));
        EXPECT_NO_THROW(check_config(c)) << name;
        const json canon = config_to_json(c);
        const ExperimentConfig back = parse_config(canon);
        EXPECT_EQ(config_to_json(back), canon) << name;
        EXPECT_EQ(config_hash(back), config_hash(c)) << name;
        EXPECT_EQ(config_hash(c).size(), 16u);
    }
}

TEST(Config, HashIsKeyOrderIndependentAndSensitive) {
    const json a = json::parse(R"({"b": 1, "a": [1, 2]})");
    const json b = json::parse(R"({"a": [1, 2], "b": 1})");
    EXPECT_EQ(config_hash(a), config_hash(b));
    ExperimentConfig c = parse_config(minimal());
    const std::string h = config_hash(c);
    c.tol *= 1.0000001;
    EXPECT_NE(config_hash(c), h);
}

TEST(Config, Fnv1aReferenceVectors) {
    EXPECT_EQ(fnv1a64(""), 0xcbf29ce484222325ull);
    EXPECT_EQ(fnv1a64("a"), 0xaf63dc4c8601ec8cull);
    EXPECT_EQ(fnv1a64("foobar"), 0x85944171f73967e8ull);
}

TEST(Config, MakeProblemCarriesData) {
    const ExperimentConfig c = parse_config(load("harmonic2.json"));
    const GeodesicProblem p = make_problem(c);
    EXPECT_EQ(p.dim(), 2);
    EXPECT_TRUE(p.impulsive());
    EXPECT_EQ(p.x0, make_vec({1, 0}));
    EXPECT_DOUBLE_EQ(p.start_u, -1.0);
    EXPECT_NO_THROW(p.validate());
}
