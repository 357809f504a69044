#ifndef SEMOFF_NNET_HPP
#define SEMOFF_NNET_HPP

#include "semoff/errors.hpp"
#include "semoff/rng.hpp"

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <random>
#include <span>
#include <string>
#include <vector>

namespace semoff::nnet {

/// Flat parameter vector plus the layer sizes that give it meaning.
/// This is the unit exchanged by federated averaging.
struct PolicyParams {
    std::vector<std::size_t> shape;
    std::vector<double> values;

    bool operator==(const PolicyParams&) const = default;
};

inline std::size_t param_count(const std::vector<std::size_t>& sizes)
{
    std::size_t n = 0;
    for (std::size_t l = 0; l + 1 < sizes.size(); ++l) n += sizes[l] * sizes[l + 1] + sizes[l + 1];
    return n;
}

/// Fully connected net: tanh on hidden layers, identity on the output layer.
///
/// Parameters live in one flat vector, layer by layer, each layer stored as a
/// row-major (out x in) weight matrix followed by its bias.
class DenseNet {
public:
    /// Activations recorded by a forward pass; tied to the parameter version it saw.
    struct Cache {
        std::vector<std::vector<double>> acts;
        std::uint64_t version = 0;
        const DenseNet* owner = nullptr;
    };

    DenseNet() = default;

    /// He-style uniform init, bound sqrt(6 / fan_in); biases zero. The output
    /// layer bound is multiplied by `output_gain`.
    DenseNet(std::vector<std::size_t> sizes, std::uint64_t seed, double output_gain = 1.0) : sizes_(std::move(sizes))
    {
        if (sizes_.size() < 2) throw ShapeError("DenseNet: need at least input and output sizes");
        for (auto s : sizes_)
            if (s == 0) throw ShapeError("DenseNet: zero-width layer");
        params_.assign(param_count(sizes_), 0.0);
        Rng rng(seed);
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            const std::size_t in = sizes_[l], out = sizes_[l + 1];
            double bound = std::sqrt(6.0 / static_cast<double>(in));
            if (l + 2 == sizes_.size()) bound *= output_gain;
            std::uniform_real_distribution<double> u(-bound, bound);
            for (std::size_t k = 0; k < in * out; ++k) params_[off + k] = u(rng);
            off += in * out + out;
        }
        bump();
    }

    static DenseNet from_params(const PolicyParams& p)
    {
        DenseNet net;
        if (p.shape.size() < 2) throw ShapeError("from_params: need at least input and output sizes");
        if (param_count(p.shape) != p.values.size()) throw ShapeError("from_params: value count does not match shape");
        net.sizes_ = p.shape;
        net.params_ = p.values;
        net.bump();
        return net;
    }

    PolicyParams flatten() const { return {sizes_, params_}; }

    void unflatten(const PolicyParams& p)
    {
        if (p.shape != sizes_) throw ShapeError("unflatten: shape mismatch");
        if (p.values.size() != params_.size()) throw ShapeError("unflatten: value count mismatch");
        params_ = p.values;
        bump();
    }

    const std::vector<std::size_t>& sizes() const { return sizes_; }
    std::size_t input_size() const { return sizes_.front(); }
    std::size_t output_size() const { return sizes_.back(); }
    std::size_t num_params() const { return params_.size(); }
    std::uint64_t version() const { return version_; }

    std::span<const double> params() const { return params_; }

    /// Writable view; invalidates outstanding caches.
    std::span<double> mutable_params()
    {
        bump();
        return params_;
    }

    void set_params(std::span<const double> v)
    {
        if (v.size() != params_.size()) throw ShapeError("set_params: size mismatch");
        params_.assign(v.begin(), v.end());
        bump();
    }

    std::vector<double> forward(std::span<const double> x) const
    {
        Cache c;
        return forward(x, c);
    }

    std::vector<double> forward(std::span<const double> x, Cache& cache) const
    {
        if (x.size() != input_size())
            throw ShapeError("forward: input size " + std::to_string(x.size()) + ", expected " +
                             std::to_string(input_size()));
        cache.acts.resize(sizes_.size());
        cache.acts[0].assign(x.begin(), x.end());
        std::size_t off = 0;
        for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
            const std::size_t in = sizes_[l], out = sizes_[l + 1];
            const double* w = params_.data() + off;
            const double* b = w + in * out;
            const auto& a = cache.acts[l];
            auto& z = cache.acts[l + 1];
            z.resize(out);
            const bool hidden = l + 2 < sizes_.size();
            for (std::size_t r = 0; r < out; ++r) {
                double s = b[r];
                const double* row = w + r * in;
                for (std::size_t c = 0; c < in; ++c) s += row[c] * a[c];
                z[r] = hidden ? std::tanh(s) : s;
            }
            off += in * out + out;
        }
        cache.version = version_;
        cache.owner = this;
        return cache.acts.back();
    }

    /// Accumulates d(sum grad_out . output)/d(params) into `grad_params`.
    /// Optionally writes the input gradient.
    void backward(const Cache& cache, std::span<const double> grad_out, std::span<double> grad_params,
                  std::vector<double>* grad_input = nullptr) const
    {
        if (cache.owner != this || cache.version != version_ || cache.acts.size() != sizes_.size())
            throw std::logic_error("backward: stale or foreign forward cache");
        if (grad_out.size() != output_size()) throw ShapeError("backward: output gradient size mismatch");
        if (grad_params.size() != params_.size()) throw ShapeError("backward: parameter gradient size mismatch");

        std::vector<double> delta(grad_out.begin(), grad_out.end());
        std::vector<double> prev;
        std::size_t off = params_.size();
        for (std::size_t l = sizes_.size() - 1; l-- > 0;) {
            const std::size_t in = sizes_[l], out = sizes_[l + 1];
            off -= in * out + out;
            if (l + 2 < sizes_.size()) {
                // tanh'(z) = 1 - a^2 on hidden layers
                const auto& a = cache.acts[l + 1];
                for (std::size_t r = 0; r < out; ++r) delta[r] *= 1.0 - a[r] * a[r];
            }
            const double* w = params_.data() + off;
            double* gw = grad_params.data() + off;
            double* gb = gw + in * out;
            const auto& x = cache.acts[l];
            for (std::size_t r = 0; r < out; ++r) {
                const double d = delta[r];
                gb[r] += d;
                if (d == 0.0) continue;
                double* grow = gw + r * in;
                for (std::size_t c = 0; c < in; ++c) grow[c] += d * x[c];
            }
            if (l == 0 && !grad_input) break;
            prev.assign(in, 0.0);
            for (std::size_t r = 0; r < out; ++r) {
                const double* row = w + r * in;
                for (std::size_t c = 0; c < in; ++c) prev[c] += row[c] * delta[r];
            }
            delta.swap(prev);
        }
        if (grad_input) *grad_input = delta;
    }

private:
    void bump()
    {
        static std::atomic<std::uint64_t> counter{1};
        version_ = counter.fetch_add(1, std::memory_order_relaxed);
    }

    std::vector<std::size_t> sizes_;
    std::vector<double> params_;
    std::uint64_t version_ = 0;
};

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    AdamState() = default;
    explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
    bool operator==(const AdamState&) const = default;
};

struct AdamHyper {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct StepStatus {
    bool applied = true;
    std::string diagnostic;
};

/// One bias-corrected Adam step (descent). A non-finite gradient leaves both
/// the parameters and the optimizer state untouched.
inline StepStatus adam_step(std::span<double> params, std::span<const double> grads, AdamState& st, double lr,
                            const AdamHyper& h = {})
{
    if (params.size() != grads.size() || st.m.size() != params.size() || st.v.size() != params.size())
        throw ShapeError("adam_step: size mismatch");
    for (std::size_t i = 0; i < grads.size(); ++i)
        if (!std::isfinite(grads[i]))
            return {false, "non-finite gradient at index " + std::to_string(i)};
    ++st.t;
    const double c1 = 1.0 - std::pow(h.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(h.beta2, static_cast<double>(st.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        st.m[i] = h.beta1 * st.m[i] + (1.0 - h.beta1) * grads[i];
        st.v[i] = h.beta2 * st.v[i] + (1.0 - h.beta2) * grads[i] * grads[i];
        const double mh = st.m[i] / c1;
        const double vh = st.v[i] / c2;
        params[i] -= lr * mh / (std::sqrt(vh) + h.eps);
    }
    return {};
}

// ---------------------------------------------------------------------------
// Checkpoints
//
// Binary, little-endian host order:
//   "SEMOFFCK" | u32 version | u32 kind | u64 episode | u32 net count |
//   per net:  u32 layer count, u64 sizes[], u64 n, f64 params[n] |
//   u32 optimizer count | per optimizer: u64 t, u64 n, f64 m[n], f64 v[n]
// ---------------------------------------------------------------------------

inline constexpr char kCheckpointMagic[8] = {'S', 'E', 'M', 'O', 'F', 'F', 'C', 'K'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

enum class CheckpointKind : std::uint32_t { Ppo = 1, Dqn = 2 };

struct Checkpoint {
    CheckpointKind kind = CheckpointKind::Ppo;
    std::uint64_t episode = 0;
    std::vector<PolicyParams> nets;
    std::vector<AdamState> optimizers;

    bool operator==(const Checkpoint&) const = default;
};

namespace detail {

template <class T>
void put(std::ostream& out, T v)
{
    out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <class T>
T get(std::istream& in)
{
    T v{};
    if (!in.read(reinterpret_cast<char*>(&v), sizeof(T))) throw MissingArtifact("checkpoint truncated");
    return v;
}

inline void put_doubles(std::ostream& out, const std::vector<double>& v)
{
    put<std::uint64_t>(out, v.size());
    out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

inline std::vector<double> get_doubles(std::istream& in)
{
    const auto n = get<std::uint64_t>(in);
    if (n > (std::uint64_t{1} << 32)) throw MissingArtifact("checkpoint corrupt: implausible array length");
    std::vector<double> v(n);
    if (!in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n * sizeof(double))))
        throw MissingArtifact("checkpoint truncated");
    return v;
}

} // namespace detail

inline void write_checkpoint(std::ostream& out, const Checkpoint& ck)
{
    out.write(kCheckpointMagic, sizeof kCheckpointMagic);
    detail::put<std::uint32_t>(out, kCheckpointVersion);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.kind));
    detail::put<std::uint64_t>(out, ck.episode);
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.nets.size()));
    for (const auto& p : ck.nets) {
        detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(p.shape.size()));
        for (auto s : p.shape) detail::put<std::uint64_t>(out, s);
        detail::put_doubles(out, p.values);
    }
    detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ck.optimizers.size()));
    for (const auto& o : ck.optimizers) {
        detail::put<std::uint64_t>(out, o.t);
        detail::put_doubles(out, o.m);
        detail::put_doubles(out, o.v);
    }
}

inline Checkpoint read_checkpoint(std::istream& in)
{
    char magic[8];
    if (!in.read(magic, 8) || std::memcmp(magic, kCheckpointMagic, 8) != 0)
        throw MissingArtifact("not a checkpoint file (bad magic)");
    if (detail::get<std::uint32_t>(in) != kCheckpointVersion) throw MissingArtifact("unsupported checkpoint version");
    Checkpoint ck;
    ck.kind = static_cast<CheckpointKind>(detail::get<std::uint32_t>(in));
    ck.episode = detail::get<std::uint64_t>(in);
    const auto nets = detail::get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < nets; ++i) {
        PolicyParams p;
        const auto layers = detail::get<std::uint32_t>(in);
        for (std::uint32_t l = 0; l < layers; ++l) p.shape.push_back(detail::get<std::uint64_t>(in));
        p.values = detail::get_doubles(in);
        if (param_count(p.shape) != p.values.size()) throw MissingArtifact("checkpoint corrupt: shape/value mismatch");
        ck.nets.push_back(std::move(p));
    }
    const auto opts = detail::get<std::uint32_t>(in);
    for (std::uint32_t i = 0; i < opts; ++i) {
        AdamState s;
        s.t = detail::get<std::uint64_t>(in);
        s.m = detail::get_doubles(in);
        s.v = detail::get_doubles(in);
        ck.optimizers.push_back(std::move(s));
    }
    return ck;
}

inline void save_checkpoint(const std::string& path, const Checkpoint& ck)
{
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write checkpoint '" + path + "'");
    write_checkpoint(out, ck);
}

inline Checkpoint load_checkpoint(const std::string& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingArtifact("cannot open checkpoint '" + path + "'");
    return read_checkpoint(in);
}

} // namespace semoff::nnet

#endif // SEMOFF_NNET_HPP
