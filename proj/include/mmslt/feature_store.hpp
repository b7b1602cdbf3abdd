#pragma once

// Precomputed description features: video id -> T x C-bar matrix. The header
// carries a config hash (description cache content, encoder seed, dims) so a
// stale store is rejected instead of silently reused.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <string>

#include "mmslt/autograd.hpp"

namespace mmslt {

struct FeatureStore {
    std::uint64_t config_hash{0};
    std::map<std::string, ag::Mat> features;

    void save(const std::filesystem::path& path) const {
        std::ofstream out(path, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write feature store: " + path.string());
        out.write("MMSLTFS1", 8);
        write_u64(out, config_hash);
        write_u64(out, features.size());
        for (const auto& [id, mat] : features) {
            write_u64(out, id.size());
            out.write(id.data(), static_cast<std::streamsize>(id.size()));
            write_u64(out, static_cast<std::uint64_t>(mat.rows()));
            write_u64(out, static_cast<std::uint64_t>(mat.cols()));
            for (Eigen::Index r = 0; r < mat.rows(); ++r) {
                for (Eigen::Index c = 0; c < mat.cols(); ++c) {
                    const double v = mat(r, c);
                    out.write(reinterpret_cast<const char*>(&v), sizeof(v));
                }
            }
        }
        if (!out) throw std::runtime_error("feature store write failed: " + path.string());
    }

    static FeatureStore load(const std::filesystem::path& path) {
        std::ifstream in(path, std::ios::binary);
        if (!in) throw std::runtime_error("feature store not found: " + path.string());
        char magic[8];
        in.read(magic, 8);
        if (in.gcount() != 8 || std::string(magic, 8) != "MMSLTFS1") {
            throw std::runtime_error("not a feature store file: " + path.string());
        }
        FeatureStore fs;
        fs.config_hash = read_u64(in, path);
        const std::uint64_t count = read_u64(in, path);
        for (std::uint64_t i = 0; i < count; ++i) {
            const std::uint64_t id_len = read_u64(in, path);
            std::string id(id_len, '\0');
            in.read(id.data(), static_cast<std::streamsize>(id_len));
            const auto rows = static_cast<Eigen::Index>(read_u64(in, path));
            const auto cols = static_cast<Eigen::Index>(read_u64(in, path));
            ag::Mat mat(rows, cols);
            for (Eigen::Index r = 0; r < rows; ++r) {
                for (Eigen::Index c = 0; c < cols; ++c) {
                    double v = 0;
                    in.read(reinterpret_cast<char*>(&v), sizeof(v));
                    mat(r, c) = v;
                }
            }
            if (!in) throw std::runtime_error("truncated feature store: " + path.string());
            fs.features.emplace(std::move(id), std::move(mat));
        }
        return fs;
    }

    static FeatureStore load_checked(const std::filesystem::path& path, std::uint64_t expected_hash) {
        FeatureStore fs = load(path);
        if (fs.config_hash != expected_hash) {
            throw std::runtime_error(
                "feature store is stale (description cache or encoder seed changed); rebuild with "
                "build-feature-store: " +
                path.string());
        }
        return fs;
    }

    const ag::Mat& require(const std::string& video_id) const {
        auto it = features.find(video_id);
        if (it == features.end()) {
            throw std::runtime_error("no description features for video " + video_id);
        }
        return it->second;
    }

private:
    static void write_u64(std::ofstream& out, std::uint64_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    }
    static std::uint64_t read_u64(std::ifstream& in, const std::filesystem::path& path) {
        std::uint64_t v = 0;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!in) throw std::runtime_error("truncated feature store: " + path.string());
        return v;
    }
};

}  // namespace mmslt
