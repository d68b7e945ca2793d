#include "exwave/field.hpp"

#include "exwave/error.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <nlohmann/json.hpp>

namespace exwave {

namespace {

std::uint64_t to_little_endian(std::uint64_t v)
{
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        std::uint64_t r = 0;
        for (int b = 0; b < 8; ++b) r |= ((v >> (8 * b)) & 0xffu) << (8 * (7 - b));
        return r;
    }
}

std::filesystem::path sidecar_path(const std::filesystem::path& path)
{
    auto side = path;
    side.replace_extension(".json");
    return side;
}

}  // namespace

double ScalarField::max_abs() const
{
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
}

double ScalarField::interpolate(const Vec3& p) const
{
    int cell[3];
    double frac[3];
    for (int a = 0; a < 3; ++a) {
        const double s = (p[a] - grid_.origin[a]) / grid_.h;
        int c = static_cast<int>(std::floor(s));
        c = std::clamp(c, 0, grid_.dims[a] - 2);
        cell[a] = c;
        frac[a] = std::clamp(s - c, 0.0, 1.0);
    }
    double acc = 0.0;
    for (int dz = 0; dz < 2; ++dz)
        for (int dy = 0; dy < 2; ++dy)
            for (int dx = 0; dx < 2; ++dx) {
                const double w = (dx ? frac[0] : 1.0 - frac[0]) * (dy ? frac[1] : 1.0 - frac[1]) *
                                 (dz ? frac[2] : 1.0 - frac[2]);
                acc += w * at(cell[0] + dx, cell[1] + dy, cell[2] + dz);
            }
    return acc;
}

void write_field(const std::filesystem::path& path, const ScalarField& field)
{
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error(ErrorKind::ConfigError, "cannot open " + path.string() + " for writing");
    for (double v : field.values()) {
        std::uint64_t bits = 0;
        std::memcpy(&bits, &v, sizeof bits);
        bits = to_little_endian(bits);
        out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
    }

    const auto& g = field.grid();
    nlohmann::ordered_json side;
    side["dims"] = {g.dims[0], g.dims[1], g.dims[2]};
    side["spacing"] = g.h;
    side["origin"] = {g.origin[0], g.origin[1], g.origin[2]};
    side["layout"] = "x-fastest, index = (iz*ny + iy)*nx + ix, little-endian float64";
    std::ofstream meta(sidecar_path(path));
    meta << side.dump(2) << '\n';
}

ScalarField read_field(const std::filesystem::path& path)
{
    std::ifstream meta(sidecar_path(path));
    if (!meta) throw Error(ErrorKind::ConfigError, "missing sidecar for " + path.string());
    const auto side = nlohmann::json::parse(meta);
    GridSpec g;
    g.h = side.at("spacing").get<double>();
    for (int a = 0; a < 3; ++a) {
        g.dims[a] = side.at("dims")[a].get<int>();
        g.origin[a] = side.at("origin")[a].get<double>();
    }
    ScalarField field(g);
    std::ifstream in(path, std::ios::binary);
    for (std::size_t n = 0; n < field.size(); ++n) {
        std::uint64_t bits = 0;
        in.read(reinterpret_cast<char*>(&bits), sizeof bits);
        bits = to_little_endian(bits);
        std::memcpy(&field[n], &bits, sizeof bits);
    }
    if (!in) throw Error(ErrorKind::ConfigError, "truncated field file " + path.string());
    return field;
}

}  // namespace exwave
