#ifndef MIXNET_ARCHIVE_HPP
#define MIXNET_ARCHIVE_HPP

#include <cstdint>
#include <fstream>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "mixnet/common.hpp"

namespace mixnet {

// Single-file container: a JSON header (free-form metadata plus an array
// index) followed by raw little-endian float64 payloads. Used for model
// checkpoints and trained classifiers.
struct Archive {
    nlohmann::json meta = nlohmann::json::object();
    std::map<std::string, std::vector<double>> arrays;

    static constexpr const char* kMagic = "MIXARCHV1\n";

    void save(const std::string& path) const {
        nlohmann::json header;
        header["meta"] = meta;
        nlohmann::json index = nlohmann::json::array();
        uint64_t offset = 0;
        for (const auto& [name, data] : arrays) {
            index.push_back({{"name", name}, {"offset", offset}, {"count", data.size()}});
            offset += data.size() * sizeof(double);
        }
        header["arrays"] = index;
        std::string hs = header.dump();

        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("archive: cannot open " + path + " for writing");
        out.write(kMagic, 10);
        uint64_t hlen = hs.size();
        out.write(reinterpret_cast<const char*>(&hlen), sizeof(hlen));
        out.write(hs.data(), static_cast<std::streamsize>(hs.size()));
        for (const auto& [name, data] : arrays)
            out.write(reinterpret_cast<const char*>(data.data()),
                      static_cast<std::streamsize>(data.size() * sizeof(double)));
        if (!out) throw std::runtime_error("archive: write failed for " + path);
    }

    static Archive load(const std::string& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("archive: cannot open " + path);
        char magic[10];
        in.read(magic, 10);
        if (!in || std::string(magic, 10) != kMagic)
            throw std::runtime_error("archive: " + path + " is not a model archive");
        uint64_t hlen = 0;
        in.read(reinterpret_cast<char*>(&hlen), sizeof(hlen));
        std::string hs(hlen, '\0');
        in.read(hs.data(), static_cast<std::streamsize>(hlen));
        if (!in) throw std::runtime_error("archive: truncated header in " + path);
        nlohmann::json header = nlohmann::json::parse(hs);
        Archive a;
        a.meta = header.at("meta");
        for (const auto& e : header.at("arrays")) {
            std::string name = e.at("name").get<std::string>();
            size_t count = e.at("count").get<size_t>();
            std::vector<double> data(count);
            in.read(reinterpret_cast<char*>(data.data()),
                    static_cast<std::streamsize>(count * sizeof(double)));
            if (!in) throw std::runtime_error("archive: truncated payload in " + path);
            a.arrays.emplace(std::move(name), std::move(data));
        }
        return a;
    }
};

}  // namespace mixnet

#endif
