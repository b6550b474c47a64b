#pragma once

// Output files of the driver. Summaries are always JSON; tables and
// coefficient dumps follow --format. Each file carries the config hash.
// Without a directory nothing is written and everything lands in collected().

#include <string>
#include <vector>

#include "json.hpp"
#include "qpnls/field.hpp"

namespace qpnls::tools {

using nlohmann::json;

class Emitter {
public:
    Emitter(std::string dir, std::string format, std::string hash);
    /// In-memory sink: reports, tables and fields as JSON keyed by name.
    explicit Emitter(std::string hash);

    void report(const std::string& name, json j);
    void table(const std::string& name, const std::vector<std::string>& header,
               const std::vector<std::vector<double>>& rows);
    void field(const std::string& name, const FourierField& f);

    const std::string& hash() const { return hash_; }
    const std::vector<std::string>& written() const { return written_; }
    const json& collected() const { return collected_; }

private:
    std::string path(const std::string& name, const char* ext);

    std::string dir_, format_, hash_;
    std::vector<std::string> written_;
    bool memory_ = false;
    json collected_ = json::object();
};

json field_json(const FourierField& f);
json spatial_json(const SpatialField& f);

}  // namespace qpnls::tools
