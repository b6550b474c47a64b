#include "emit.hpp"

#include <filesystem>
#include <fstream>
#include <iomanip>

#include "qpnls/errors.hpp"

namespace qpnls::tools {

namespace fs = std::filesystem;

Emitter::Emitter(std::string dir, std::string format, std::string hash)
    : dir_(std::move(dir)), format_(std::move(format)), hash_(std::move(hash)) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir_);
}

Emitter::Emitter(std::string hash) : format_("json"), hash_(std::move(hash)), memory_(true) {}

std::string Emitter::path(const std::string& name, const char* ext) {
    auto p = (fs::path(dir_) / (name + ext)).string();
    written_.push_back(p);
    return p;
}

void Emitter::report(const std::string& name, json j) {
    j["config_hash"] = hash_;
    if (memory_) {
        collected_[name] = std::move(j);
        return;
    }
    std::ofstream os(path(name, ".json"));
    os << std::setw(2) << j << '\n';
}

void Emitter::table(const std::string& name, const std::vector<std::string>& header,
                    const std::vector<std::vector<double>>& rows) {
    if (format_ == "json") {
        json j;
        j["columns"] = header;
        j["rows"] = rows;
        report(name, std::move(j));
        return;
    }
    std::ofstream os(path(name, ".csv"));
    os << "# config_hash=" << hash_ << '\n';
    for (std::size_t c = 0; c < header.size(); ++c) os << (c ? "," : "") << header[c];
    os << '\n' << std::setprecision(17);
    for (const auto& r : rows) {
        for (std::size_t c = 0; c < r.size(); ++c) os << (c ? "," : "") << r[c];
        os << '\n';
    }
}

void Emitter::field(const std::string& name, const FourierField& f) {
    if (format_ == "bin") {
        std::ofstream os(path(name, ".bin"), std::ios::binary);
        write_binary(os, f);
        // trailer after the counted entries; readers stop at the count
        os.write("HASH", 4);
        os.write(hash_.data(), static_cast<std::streamsize>(hash_.size()));
        return;
    }
    if (format_ == "csv") {
        const auto& lat = f.lattice();
        std::vector<std::string> header;
        for (std::size_t q = 0; q < lat.B(); ++q) header.push_back("n" + std::to_string(q));
        for (int q = 0; q < lat.d(); ++q) header.push_back("j" + std::to_string(q));
        header.push_back("re");
        header.push_back("im");
        std::vector<std::vector<double>> rows;
        for (const auto& [k, c] : f.entries()) {
            const auto s = lat.decode(k);
            std::vector<double> r(s.n.begin(), s.n.end());
            r.insert(r.end(), s.j.begin(), s.j.end());
            r.push_back(c.real());
            r.push_back(c.imag());
            rows.push_back(std::move(r));
        }
        table(name, header, rows);
        return;
    }
    report(name, field_json(f));
}

json field_json(const FourierField& f) {
    json j;
    const auto& lat = f.lattice();
    j["B"] = lat.B();
    j["d"] = lat.d();
    j["count"] = f.size();
    json e = json::array();
    for (const auto& [k, c] : f.entries()) {
        const auto s = lat.decode(k);
        e.push_back({{"n", s.n}, {"j", s.j}, {"re", c.real()}, {"im", c.imag()}});
    }
    j["entries"] = std::move(e);
    return j;
}

json spatial_json(const SpatialField& f) {
    json e = json::array();
    for (const auto& [j, c] : f) e.push_back({{"j", j}, {"re", c.real()}, {"im", c.imag()}});
    return e;
}

}  // namespace qpnls::tools
