#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "superct/io.hpp"
#include "superct/rng.hpp"

using namespace superct;

namespace {
std::string tmp_path(const char* name) {
    return (std::filesystem::temp_directory_path() / name).string();
}
}  // namespace

TEST_CASE("f32 image round trip") {
    Image img(5, 7, 0.75);
    Prng rng(42, 0);
    for (double& v : img.data) v = static_cast<float>(rng.uniform());  // f32-exact
    const std::string path = tmp_path("io_img.f32");
    write_f32_image(img, path);
    const Image back = read_f32_image(path);
    CHECK(back.rows == 5);
    CHECK(back.cols == 7);
    CHECK(back.pixel_size_mm == doctest::Approx(0.75));
    CHECK(back.data == img.data);
    std::filesystem::remove(path);
}

TEST_CASE("f32 sinogram round trip keeps pitch slot") {
    Sinogram s(3, 4);
    for (std::size_t i = 0; i < s.size(); ++i) s.data[i] = static_cast<double>(i);
    const std::string path = tmp_path("io_sino.f32");
    write_f32_sinogram(s, 1.25, path);
    const Sinogram back = read_f32_sinogram(path);
    CHECK(back.n_views == 3);
    CHECK(back.n_detectors == 4);
    CHECK(back.data == s.data);
    std::filesystem::remove(path);
}

TEST_CASE("f32 read errors") {
    CHECK_THROWS_AS(read_f32_image("/nonexistent/definitely.f32"), std::runtime_error);

    const std::string path = tmp_path("io_bad.f32");
    {
        std::ofstream f(path);
        f << "PNG v1 4 4 1.0\n";
    }
    CHECK_THROWS_AS(read_f32_image(path), std::runtime_error);
    {
        std::ofstream f(path);
        f << "F32 v1 8 8 1.0\nxx";  // truncated payload
    }
    CHECK_THROWS_AS(read_f32_image(path), std::runtime_error);
    std::filesystem::remove(path);
}

TEST_CASE("fnv1a64 known vectors") {
    CHECK(fnv1a64("") == 0xcbf29ce484222325ULL);
    CHECK(fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
    CHECK(fnv1a64("hello") != fnv1a64("hellp"));
}
