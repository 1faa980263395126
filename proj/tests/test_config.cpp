#include <doctest.h>

#include "superct/config.hpp"

using namespace superct;

TEST_CASE("defaults validate") {
    const ExperimentConfig cfg = default_experiment_config();
    CHECK_NOTHROW(cfg.validate());
    CHECK(cfg.geometry.n_views == 96);
    CHECK(cfg.lambdas.size() == 5);
}

TEST_CASE("parse -> serialize -> parse is identity") {
    ExperimentConfig cfg = default_experiment_config();
    cfg.lambda = 0.7;
    cfg.noise.incident_photons = 12345.5;
    cfg.output_dir = "elsewhere";
    cfg.geometry.beam = Beam::fan_arc;
    const std::string text = serialize_experiment_config(cfg);
    const ExperimentConfig back = parse_experiment_config(text);
    CHECK(serialize_experiment_config(back) == text);
    CHECK(back.lambda == cfg.lambda);
    CHECK(back.noise.incident_photons == cfg.noise.incident_photons);
    CHECK(back.output_dir == "elsewhere");
    CHECK(back.geometry.beam == Beam::fan_arc);
}

TEST_CASE("parser accepts comments, spacing, arrays") {
    const char* text =
        "# experiment\n"
        "[super]\n"
        "lambdas = [0.25, 0.75]   # two candidates\n"
        "lambda  =   0.25\n"
        "layers=2\n"
        "\n"
        "[noise]\n"
        "mean_only = true\n";
    const ExperimentConfig cfg = parse_experiment_config(text);
    CHECK(cfg.lambdas == std::vector<double>{0.25, 0.75});
    CHECK(cfg.lambda == 0.25);
    CHECK(cfg.layers == 2);
    CHECK(cfg.noise.mean_only);
}

TEST_CASE("field-level parse errors") {
    CHECK_THROWS_WITH_AS(parse_experiment_config("[super]\nlambda = fast\n"),
                         doctest::Contains("[super].lambda"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_experiment_config("[super]\nwavelength = 1\n"),
                         doctest::Contains("unknown key"), std::invalid_argument);
    CHECK_THROWS_WITH_AS(parse_experiment_config("[geometry]\nbeam = \"cone\"\n"),
                         doctest::Contains("beam"), std::invalid_argument);
    CHECK_THROWS_AS(parse_experiment_config("[super\nlambda = 0.5\n"), std::invalid_argument);
    CHECK_THROWS_AS(parse_experiment_config("[geometry]\nn_views = 2.5\n"),
                    std::invalid_argument);
}

TEST_CASE("validation rejects out-of-range values") {
    ExperimentConfig cfg = default_experiment_config();
    cfg.lambda = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = default_experiment_config();
    cfg.lambdas.clear();
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = default_experiment_config();
    cfg.transform_slices = cfg.n_train + 1;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_THROWS_AS(parse_experiment_config("[super]\nlambda = 2.0\n"),
                    std::invalid_argument);
}

TEST_CASE("load_experiment_config missing file") {
    CHECK_THROWS_AS(load_experiment_config("/nonexistent/cfg.toml"), std::runtime_error);
}
