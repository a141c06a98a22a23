#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "maxdiff/cov_spec.hpp"
#include "maxdiff/error.hpp"
#include "maxdiff/parallel.hpp"
#include "maxdiff/rng.hpp"

namespace maxdiff {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Generates draws of selected coordinates of X = L Z + offset, one replicate per
/// split child stream. Each coordinate is an independent fixed-order dot product, so
/// identical factor rows yield bit-identical coordinates and a coordinate's value does
/// not depend on which other rows are selected.
class DrawEngine {
public:
    DrawEngine(const CovSpec& spec, IndexSet rows, std::vector<double> offsets)
        : rows_(std::move(rows)), offsets_(std::move(offsets)), d_(spec.rank_dim()) {
        require(offsets_.size() == rows_.size(), ErrorCode::DimensionMismatch, "offset length");
        const Matrix& f = spec.sampling_factor();
        factor_.resize(rows_.size() * d_);
        for (std::size_t r = 0; r < rows_.size(); ++r) {
            require(rows_[r] < spec.dim(), ErrorCode::DimensionMismatch, "row index out of range");
            for (std::size_t j = 0; j < d_; ++j)
                factor_[r * d_ + j] = f(static_cast<Eigen::Index>(rows_[r]), static_cast<Eigen::Index>(j));
        }
    }

    /// Draws of all coordinates with the spec's means.
    static DrawEngine full(const CovSpec& spec) {
        IndexSet rows(spec.dim());
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        std::vector<double> mu(spec.mu().data(), spec.mu().data() + spec.mu().size());
        return DrawEngine(spec, std::move(rows), std::move(mu));
    }

    /// Centered draws X - mu of the given coordinates.
    static DrawEngine centered(const CovSpec& spec, IndexSet rows) {
        std::vector<double> zeros(rows.size(), 0.0);
        return DrawEngine(spec, std::move(rows), std::move(zeros));
    }

    std::size_t width() const noexcept { return rows_.size(); }
    const IndexSet& rows() const noexcept { return rows_; }

    /// Fills out[r * width() + k] with coordinate rows()[k] of replicate first + r.
    void fill(std::uint64_t seed, std::size_t first, std::size_t count, std::vector<double>& z,
              std::vector<double>& acc, double* out) const {
        z.resize(d_ * count);
        acc.resize(count);
        for (std::size_t r = 0; r < count; ++r) {
            Xoshiro256 rng(split_seed(seed, first + r));
            for (std::size_t j = 0; j < d_; ++j) z[j * count + r] = rng.normal();
        }
        const std::size_t m = rows_.size();
        for (std::size_t k = 0; k < m; ++k) {
            std::fill(acc.begin(), acc.end(), 0.0);
            const double* frow = factor_.data() + k * d_;
            for (std::size_t j = 0; j < d_; ++j) {
                const double g = frow[j];
                if (g == 0.0) continue;
                const double* zj = z.data() + j * count;
                for (std::size_t r = 0; r < count; ++r) acc[r] += g * zj[r];
            }
            const double off = offsets_[k];
            for (std::size_t r = 0; r < count; ++r) out[r * m + k] = acc[r] + off;
        }
    }

    /// Streams n draws in chunks: fn(chunk_index, first, count, const double* block).
    template <class Fn>
    void for_each_chunk(std::size_t n, std::uint64_t seed, unsigned threads, Fn&& fn) const {
        const std::size_t chunks = chunk_count(n);
        maxdiff::for_each_chunk(chunks, threads, [&](std::size_t c) {
            const std::size_t first = c * kChunk;
            const std::size_t count = std::min(kChunk, n - first);
            thread_local std::vector<double> z, acc, block;
            block.resize(count * width());
            fill(seed, first, count, z, acc, block.data());
            fn(c, first, count, static_cast<const double*>(block.data()));
        });
    }

private:
    IndexSet rows_;
    std::vector<double> offsets_;
    std::size_t d_;
    std::vector<double> factor_;  // row-major, rows_.size() x d_
};

struct SampleBatch {
    std::size_t n_rep = 0;
    std::size_t p = 0;
    RowMatrix data;
    std::uint64_t seed = 0;
    std::string spec_hash;
    std::string normal_method = kNormalMethod;
};

/// n_rep draws of X = L Z + mu. Replicate k always comes from child stream split(seed, k).
inline SampleBatch sample(const CovSpec& spec, std::size_t n_rep, std::uint64_t seed,
                          unsigned threads = default_threads()) {
    require(n_rep >= 1, ErrorCode::InvalidArgument, "n_rep must be at least 1");
    SampleBatch batch;
    batch.n_rep = n_rep;
    batch.p = spec.dim();
    batch.seed = seed;
    batch.spec_hash = spec.hash();
    batch.data.resize(static_cast<Eigen::Index>(n_rep), static_cast<Eigen::Index>(spec.dim()));
    const DrawEngine engine = DrawEngine::full(spec);
    engine.for_each_chunk(n_rep, seed, threads,
                          [&](std::size_t, std::size_t first, std::size_t count, const double* block) {
                              std::copy(block, block + count * batch.p,
                                        batch.data.data() + first * batch.p);
                          });
    return batch;
}

struct DiffSample {
    std::vector<double> values;  // M_B - M_A per replicate
    double mean = 0.0;
    double sd = 0.0;
    std::optional<Partition> partition;

    DiffSample() = default;
    explicit DiffSample(std::vector<double> v, std::optional<Partition> part = std::nullopt)
        : values(std::move(v)), partition(std::move(part)) {
        summarize();
    }

    std::size_t size() const noexcept { return values.size(); }

    void summarize() {
        const double n = static_cast<double>(values.size());
        if (values.empty()) return;
        double s = 0.0;
        for (double v : values) s += v;
        mean = s / n;
        double ss = 0.0;
        for (double v : values) ss += (v - mean) * (v - mean);
        sd = values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    }
};

namespace detail {
inline double max_over(const double* row, const IndexSet& idx) {
    double m = -std::numeric_limits<double>::infinity();
    for (auto i : idx) m = std::max(m, row[i]);
    return m;
}
}  // namespace detail

/// Per-row M_B - M_A of a stored batch.
inline DiffSample max_diff(const SampleBatch& batch, const Partition& part) {
    require(part.dim() == batch.p, ErrorCode::DimensionMismatch,
            "partition dimension does not match batch");
    std::vector<double> values(batch.n_rep);
    for (std::size_t k = 0; k < batch.n_rep; ++k) {
        const double* row = batch.data.data() + k * batch.p;
        values[k] = detail::max_over(row, part.b()) - detail::max_over(row, part.a());
    }
    return DiffSample(std::move(values), part);
}

/// Streaming M_B - M_A without storing the batch.
///
/// Means enter only as differences mu_i - mu_0, and the common level is dropped
/// (it cancels in the difference), so adding a constant to every mean leaves the
/// output unchanged bit for bit whenever those differences are representable.
/// For mu = 0 the values equal max_diff(sample(...)) exactly.
inline DiffSample sample_max_diff(const CovSpec& spec, const Partition& part, std::size_t n_rep,
                                  std::uint64_t seed, unsigned threads = default_threads()) {
    require(part.dim() == spec.dim(), ErrorCode::DimensionMismatch,
            "partition dimension does not match spec");
    require(n_rep >= 1, ErrorCode::InvalidArgument, "n_rep must be at least 1");
    const std::size_t p = spec.dim();
    IndexSet rows(p);
    std::vector<double> rel(p);
    const double ref = spec.mu()(0);
    for (std::size_t i = 0; i < p; ++i) {
        rows[i] = i;
        rel[i] = spec.mu()(static_cast<Eigen::Index>(i)) - ref;
    }
    const DrawEngine engine(spec, std::move(rows), std::move(rel));
    std::vector<double> values(n_rep);
    engine.for_each_chunk(n_rep, seed, threads,
                          [&](std::size_t, std::size_t first, std::size_t count, const double* block) {
                              for (std::size_t r = 0; r < count; ++r) {
                                  const double* row = block + r * p;
                                  values[first + r] =
                                      detail::max_over(row, part.b()) - detail::max_over(row, part.a());
                              }
                          });
    return DiffSample(std::move(values), part);
}

/// 1 where the row maximizer (lowest index on ties) lies in `subset`.
inline std::vector<int> argmax_indicator(const SampleBatch& batch, const IndexSet& subset) {
    std::vector<char> in(batch.p, 0);
    for (auto i : subset) {
        require(i < batch.p, ErrorCode::DimensionMismatch, "subset index out of range");
        in[i] = 1;
    }
    std::vector<int> out(batch.n_rep);
    for (std::size_t k = 0; k < batch.n_rep; ++k) {
        const double* row = batch.data.data() + k * batch.p;
        const auto best = static_cast<std::size_t>(std::max_element(row, row + batch.p) - row);
        out[k] = in[best];
    }
    return out;
}

/// Binary row-major float64 dump plus a JSON sidecar at path + ".json".
inline void write_batch(const SampleBatch& batch, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCode::IoError, "cannot open " + path.string());
    out.write(reinterpret_cast<const char*>(batch.data.data()),
              static_cast<std::streamsize>(sizeof(double) * batch.n_rep * batch.p));
    require(static_cast<bool>(out), ErrorCode::IoError, "write failed for " + path.string());
    nlohmann::json meta = {{"n_rep", batch.n_rep},
                           {"p", batch.p},
                           {"seed", batch.seed},
                           {"spec_hash", batch.spec_hash},
                           {"normal_method", batch.normal_method}};
    std::ofstream side(path.string() + ".json");
    require(static_cast<bool>(side), ErrorCode::IoError, "cannot open sidecar for " + path.string());
    side << meta.dump(2) << '\n';
}

inline SampleBatch read_batch(const std::filesystem::path& path) {
    std::ifstream side(path.string() + ".json");
    require(static_cast<bool>(side), ErrorCode::IoError, "missing sidecar " + path.string() + ".json");
    nlohmann::json meta;
    try {
        side >> meta;
    } catch (const nlohmann::json::exception& e) {
        fail(ErrorCode::ParseError, "sidecar: " + std::string(e.what()));
    }
    SampleBatch batch;
    batch.n_rep = meta.at("n_rep").get<std::size_t>();
    batch.p = meta.at("p").get<std::size_t>();
    batch.seed = meta.at("seed").get<std::uint64_t>();
    batch.spec_hash = meta.value("spec_hash", "");
    batch.normal_method = meta.value("normal_method", "");
    batch.data.resize(static_cast<Eigen::Index>(batch.n_rep), static_cast<Eigen::Index>(batch.p));
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCode::IoError, "cannot open " + path.string());
    in.read(reinterpret_cast<char*>(batch.data.data()),
            static_cast<std::streamsize>(sizeof(double) * batch.n_rep * batch.p));
    require(in.gcount() == static_cast<std::streamsize>(sizeof(double) * batch.n_rep * batch.p),
            ErrorCode::ParseError, "batch file shorter than sidecar declares");
    return batch;
}

}  // namespace maxdiff
