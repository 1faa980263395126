#include "superct/io.hpp"

#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>
#include <vector>

namespace superct {

namespace {

void write_grid(const std::vector<double>& data, int rows, int cols, double len_mm,
                const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path + " for writing");
    char header[96];
    std::snprintf(header, sizeof(header), "F32 v1 %d %d %.9g\n", rows, cols, len_mm);
    f.write(header, static_cast<std::streamsize>(std::strlen(header)));
    std::vector<float> buf(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) buf[i] = static_cast<float>(data[i]);
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(4 * buf.size()));
    if (!f) throw std::runtime_error("write failed: " + path);
}

void read_grid(const std::string& path, std::vector<double>& data, int& rows, int& cols,
               double& len_mm) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string header;
    std::getline(f, header);
    std::istringstream is(header);
    std::string magic, version;
    is >> magic >> version >> rows >> cols >> len_mm;
    if (!is || magic != "F32" || version != "v1" || rows < 1 || cols < 1)
        throw std::runtime_error("bad F32 header in " + path);
    std::vector<float> buf(static_cast<std::size_t>(rows) * cols);
    f.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(4 * buf.size()));
    if (!f) throw std::runtime_error("truncated F32 file: " + path);
    data.resize(buf.size());
    for (std::size_t i = 0; i < buf.size(); ++i) data[i] = static_cast<double>(buf[i]);
}

}  // namespace

void write_f32_image(const Image& img, const std::string& path) {
    write_grid(img.data, img.rows, img.cols, img.pixel_size_mm, path);
}

Image read_f32_image(const std::string& path) {
    Image img;
    read_grid(path, img.data, img.rows, img.cols, img.pixel_size_mm);
    return img;
}

void write_f32_sinogram(const Sinogram& s, double pitch_mm, const std::string& path) {
    write_grid(s.data, s.n_views, s.n_detectors, pitch_mm, path);
}

Sinogram read_f32_sinogram(const std::string& path) {
    Sinogram s;
    double pitch = 0.0;
    read_grid(path, s.data, s.n_views, s.n_detectors, pitch);
    return s;
}

std::uint64_t fnv1a64(const std::string& text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace superct
