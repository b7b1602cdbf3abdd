#pragma once

// AdamW with decoupled weight decay and the cosine learning-rate schedule.

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <stdexcept>
#include <vector>

#include "mmslt/autograd.hpp"
#include "mmslt/nn.hpp"

namespace mmslt {

inline double cosine_lr(std::int64_t step, std::int64_t total_steps, double lr_max, double lr_min) {
    if (step < 0 || step > total_steps) throw std::invalid_argument("cosine_lr: step out of range");
    if (total_steps == 0) return lr_max;
    const double t = static_cast<double>(step) / static_cast<double>(total_steps);
    return lr_min + 0.5 * (lr_max - lr_min) * (1.0 + std::cos(3.141592653589793238462643 * t));
}

struct AdamWConfig {
    double lr{1e-4};
    double beta1{0.9};
    double beta2{0.98};
    double eps{1e-8};
    double weight_decay{0.0};
};

class AdamW {
public:
    std::int64_t t{0};

    // one update over trainable params with pending gradients; clears grads
    void step(const std::vector<ag::Param*>& params, const AdamWConfig& cfg) {
        ++t;
        const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
        const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
        for (ag::Param* p : params) {
            if (!p->trainable) {
                p->zero_grad();
                continue;
            }
            if (p->grad.size() == 0) continue;
            if (p->adam_m.size() == 0) {
                p->adam_m = ag::Mat::Zero(p->value.rows(), p->value.cols());
                p->adam_v = ag::Mat::Zero(p->value.rows(), p->value.cols());
            }
            p->adam_m = cfg.beta1 * p->adam_m + (1.0 - cfg.beta1) * p->grad;
            p->adam_v = cfg.beta2 * p->adam_v.array().matrix() +
                        (1.0 - cfg.beta2) * p->grad.array().square().matrix();
            const ag::Mat m_hat = p->adam_m / bc1;
            const ag::Mat v_hat = p->adam_v / bc2;
            ag::Mat update = (m_hat.array() / (v_hat.array().sqrt() + cfg.eps)).matrix();
            if (p->decay && cfg.weight_decay > 0.0) update += cfg.weight_decay * p->value;
            p->value -= cfg.lr * update;
            p->zero_grad();
        }
    }

    void save(const std::filesystem::path& file, const std::vector<ag::Param*>& params) const {
        std::ofstream out(file, std::ios::binary);
        if (!out) throw std::runtime_error("cannot write optimizer state: " + file.string());
        out.write("MMSLTOP1", 8);
        out.write(reinterpret_cast<const char*>(&t), sizeof(t));
        const std::uint64_t n = params.size();
        out.write(reinterpret_cast<const char*>(&n), sizeof(n));
        for (const ag::Param* p : params) {
            const std::uint64_t name_len = p->name.size();
            out.write(reinterpret_cast<const char*>(&name_len), sizeof(name_len));
            out.write(p->name.data(), static_cast<std::streamsize>(name_len));
            auto write_mat = [&](const ag::Mat& m) {
                const std::uint64_t rows = static_cast<std::uint64_t>(m.rows());
                const std::uint64_t cols = static_cast<std::uint64_t>(m.cols());
                out.write(reinterpret_cast<const char*>(&rows), sizeof(rows));
                out.write(reinterpret_cast<const char*>(&cols), sizeof(cols));
                out.write(reinterpret_cast<const char*>(m.data()),
                          static_cast<std::streamsize>(sizeof(double) * m.size()));
            };
            write_mat(p->adam_m);
            write_mat(p->adam_v);
        }
    }

    void load(const std::filesystem::path& file, const std::vector<ag::Param*>& params) {
        std::ifstream in(file, std::ios::binary);
        if (!in) throw std::runtime_error("optimizer state not found: " + file.string());
        char magic[8];
        in.read(magic, 8);
        if (in.gcount() != 8 || std::string(magic, 8) != "MMSLTOP1") {
            throw std::runtime_error("not an optimizer state file: " + file.string());
        }
        in.read(reinterpret_cast<char*>(&t), sizeof(t));
        std::uint64_t n = 0;
        in.read(reinterpret_cast<char*>(&n), sizeof(n));
        std::map<std::string, std::pair<ag::Mat, ag::Mat>> stored;
        for (std::uint64_t i = 0; i < n; ++i) {
            std::uint64_t name_len = 0;
            in.read(reinterpret_cast<char*>(&name_len), sizeof(name_len));
            std::string name(name_len, '\0');
            in.read(name.data(), static_cast<std::streamsize>(name_len));
            auto read_mat = [&]() {
                std::uint64_t rows = 0, cols = 0;
                in.read(reinterpret_cast<char*>(&rows), sizeof(rows));
                in.read(reinterpret_cast<char*>(&cols), sizeof(cols));
                ag::Mat m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
                in.read(reinterpret_cast<char*>(m.data()),
                        static_cast<std::streamsize>(sizeof(double) * m.size()));
                return m;
            };
            ag::Mat m1 = read_mat();
            ag::Mat m2 = read_mat();
            if (!in) throw std::runtime_error("truncated optimizer state: " + file.string());
            stored.emplace(std::move(name), std::make_pair(std::move(m1), std::move(m2)));
        }
        for (ag::Param* p : params) {
            auto it = stored.find(p->name);
            if (it == stored.end()) continue;
            p->adam_m = it->second.first;
            p->adam_v = it->second.second;
        }
    }
};

}  // namespace mmslt
