#include "ddw/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace ddw {

namespace {

constexpr char kMagic[4] = {'G', 'R', 'D', '1'};
constexpr std::uint32_t kVersion = 1;

static_assert(std::endian::native == std::endian::little,
              "GRD1 I/O assumes a little-endian host");

template <class T>
void put(std::string& buf, T v) {
    char raw[sizeof(T)];
    std::memcpy(raw, &v, sizeof(T));
    buf.append(raw, sizeof(T));
}

template <class T>
T take(std::istream& in, const char* what) {
    T v;
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T)))
        throw IoError(std::string("truncated header field: ") + what);
    return v;
}

std::string fmt_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::vector<double> parse_csv_doubles(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string tok;
    while (std::getline(ss, tok, ','))
        out.push_back(std::stod(tok));
    return out;
}

} // namespace

void GridSpec::validate() const {
    if (n_lat < 2 || n_lon < 2)
        throw ShapeMismatch("grid must be at least 2x2");
    if (static_cast<int>(lat_deg.size()) != n_lat || static_cast<int>(lon_deg.size()) != n_lon)
        throw ShapeMismatch("lat/lon list length mismatch");
    for (int j = 1; j < n_lat; ++j)
        if (!(lat_deg[j] < lat_deg[j - 1]))
            throw ShapeMismatch("latitudes must be strictly descending");
    const double step = lon_deg[1] - lon_deg[0];
    for (int k = 1; k < n_lon; ++k) {
        const double d = lon_deg[k] - lon_deg[k - 1];
        if (!(d > 0) || std::abs(d - step) > 1e-9 * std::max(1.0, std::abs(step)))
            throw ShapeMismatch("longitudes must ascend with uniform spacing");
    }
}

GridSpec GridSpec::regular_2p5() {
    GridSpec g;
    g.n_lat = 72;
    g.n_lon = 144;
    for (int j = 0; j < 72; ++j) g.lat_deg.push_back(88.75 - 2.5 * j);
    for (int k = 0; k < 144; ++k) g.lon_deg.push_back(2.5 * k);
    return g;
}

GridSpec GridSpec::uniform(int n_lat, int n_lon) {
    GridSpec g;
    g.n_lat = n_lat;
    g.n_lon = n_lon;
    const double dlat = 180.0 / n_lat;
    for (int j = 0; j < n_lat; ++j) g.lat_deg.push_back(90.0 - dlat / 2 - dlat * j);
    const double dlon = 360.0 / n_lon;
    for (int k = 0; k < n_lon; ++k) g.lon_deg.push_back(dlon * k);
    return g;
}

std::string VarEntry::key() const {
    std::string k;
    for (char c : short_name) k += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    if (level_hpa) k += std::to_string(*level_hpa);
    return k;
}

int VariableCatalog::index_of(const std::string& key) const {
    for (int i = 0; i < size(); ++i)
        if (entries[i].key() == key) return i;
    throw IndexOutOfRange("unknown variable: " + key);
}

void VariableCatalog::validate() const {
    std::set<std::string> seen;
    for (const auto& e : entries)
        if (!seen.insert(e.key()).second)
            throw ShapeMismatch("duplicate variable key: " + e.key());
}

VariableCatalog VariableCatalog::full66() {
    static const int levels[12] = {1000, 925, 850, 800, 700, 600, 500, 400, 300, 200, 100, 50};
    VariableCatalog c;
    const struct { const char* name; const char* units; } upper[5] = {
        {"U", "m/s"}, {"V", "m/s"}, {"T", "K"}, {"Q", "kg/kg"}, {"Z", "m2/s2"}};
    for (const auto& u : upper)
        for (int lev : levels)
            c.entries.push_back({u.name, lev, u.units});
    c.entries.push_back({"T2m", std::nullopt, "K"});
    c.entries.push_back({"MSL", std::nullopt, "Pa"});
    c.entries.push_back({"SP", std::nullopt, "Pa"});
    c.entries.push_back({"TCWV", std::nullopt, "kg/m2"});
    c.entries.push_back({"SKT", std::nullopt, "K"});
    c.entries.push_back({"TISR", std::nullopt, "J/m2"});
    return c;
}

void HourlyArchive::validate(bool check_finite) const {
    spec.validate();
    catalog.validate();
    if (n_time < 1) throw ShapeMismatch("archive needs at least one snapshot");
    if (values.size() != static_cast<std::size_t>(n_time) * frame_size())
        throw ShapeMismatch("value array length mismatch");
    if (check_finite)
        for (float v : values)
            if (!std::isfinite(v)) throw NumericError("non-finite value in archive");
}

void write_archive(const HourlyArchive& archive, const std::string& path) {
    archive.validate(/*check_finite=*/true);

    std::string meta;
    for (const auto& e : archive.catalog.entries) {
        meta += "var=" + e.short_name + ":" +
                (e.level_hpa ? std::to_string(*e.level_hpa) : "-") + ":" + e.units + "\n";
    }
    meta += "lat=";
    for (int j = 0; j < archive.spec.n_lat; ++j)
        meta += (j ? "," : "") + fmt_double(archive.spec.lat_deg[j]);
    meta += "\nlon=";
    for (int k = 0; k < archive.spec.n_lon; ++k)
        meta += (k ? "," : "") + fmt_double(archive.spec.lon_deg[k]);
    meta += "\n";

    std::string header;
    header.append(kMagic, 4);
    put<std::uint32_t>(header, kVersion);
    put<std::uint32_t>(header, static_cast<std::uint32_t>(archive.n_time));
    put<std::uint32_t>(header, static_cast<std::uint32_t>(archive.catalog.size()));
    put<std::uint32_t>(header, static_cast<std::uint32_t>(archive.spec.n_lat));
    put<std::uint32_t>(header, static_cast<std::uint32_t>(archive.spec.n_lon));
    put<std::uint32_t>(header, static_cast<std::uint32_t>(archive.step_hours));
    put<std::int64_t>(header, archive.start_epoch_hours);
    put<std::uint32_t>(header, static_cast<std::uint32_t>(meta.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open for writing: " + path);
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    out.write(meta.data(), static_cast<std::streamsize>(meta.size()));
    out.write(reinterpret_cast<const char*>(archive.values.data()),
              static_cast<std::streamsize>(archive.values.size() * sizeof(float)));
    if (!out) throw IoError("write failure: " + path);
}

HourlyArchive read_archive(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open: " + path);

    char magic[4];
    if (!in.read(magic, 4) || std::memcmp(magic, kMagic, 4) != 0)
        throw IoError("bad magic in " + path);
    if (take<std::uint32_t>(in, "version") != kVersion)
        throw IoError("unsupported GRD1 version in " + path);

    HourlyArchive a;
    a.n_time = static_cast<int>(take<std::uint32_t>(in, "n_time"));
    const auto n_var = take<std::uint32_t>(in, "n_var");
    a.spec.n_lat = static_cast<int>(take<std::uint32_t>(in, "n_lat"));
    a.spec.n_lon = static_cast<int>(take<std::uint32_t>(in, "n_lon"));
    a.step_hours = static_cast<int>(take<std::uint32_t>(in, "step_hours"));
    a.start_epoch_hours = take<std::int64_t>(in, "start_epoch_hours");
    const auto meta_len = take<std::uint32_t>(in, "metadata_len");

    std::string meta(meta_len, '\0');
    if (!in.read(meta.data(), meta_len)) throw IoError("truncated metadata in " + path);

    std::stringstream ms(meta);
    std::string line;
    while (std::getline(ms, line)) {
        if (line.rfind("var=", 0) == 0) {
            const std::string body = line.substr(4);
            const auto c1 = body.find(':');
            const auto c2 = body.find(':', c1 + 1);
            if (c1 == std::string::npos || c2 == std::string::npos)
                throw IoError("malformed var record: " + line);
            VarEntry e;
            e.short_name = body.substr(0, c1);
            const std::string lev = body.substr(c1 + 1, c2 - c1 - 1);
            if (lev != "-") e.level_hpa = std::stoi(lev);
            e.units = body.substr(c2 + 1);
            a.catalog.entries.push_back(e);
        } else if (line.rfind("lat=", 0) == 0) {
            a.spec.lat_deg = parse_csv_doubles(line.substr(4));
        } else if (line.rfind("lon=", 0) == 0) {
            a.spec.lon_deg = parse_csv_doubles(line.substr(4));
        }
    }
    if (a.catalog.entries.size() != n_var)
        throw IoError("var record count does not match header in " + path);

    const std::size_t n = static_cast<std::size_t>(a.n_time) * a.frame_size();
    a.values.resize(n);
    if (!in.read(reinterpret_cast<char*>(a.values.data()),
                 static_cast<std::streamsize>(n * sizeof(float))))
        throw IoError("payload length mismatch in " + path);
    char extra;
    if (in.read(&extra, 1)) throw IoError("payload length mismatch in " + path);

    a.validate();
    return a;
}

HourlyArchive slice_vars(const HourlyArchive& archive, const std::vector<std::string>& keys) {
    HourlyArchive out;
    out.spec = archive.spec;
    out.start_epoch_hours = archive.start_epoch_hours;
    out.n_time = archive.n_time;
    out.step_hours = archive.step_hours;

    std::vector<int> idx;
    for (const auto& k : keys) {
        const int i = archive.catalog.index_of(k);
        idx.push_back(i);
        out.catalog.entries.push_back(archive.catalog.entries[i]);
    }

    const std::size_t cells = archive.spec.cells();
    out.values.resize(static_cast<std::size_t>(out.n_time) * idx.size() * cells);
    for (int t = 0; t < out.n_time; ++t)
        for (std::size_t v = 0; v < idx.size(); ++v)
            std::copy_n(archive.frame(t, idx[v]), cells,
                        out.values.data() + (static_cast<std::size_t>(t) * idx.size() + v) * cells);
    return out;
}

} // namespace ddw
