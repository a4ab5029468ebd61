#pragma once

#include <array>
#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "ibrscan/types.hpp"

namespace ibrscan {

struct SimConfig {
    double dt = 50e-6;          // s
    double t_end = 1.0;         // s
    int record_decimation = 1;  // store every k-th step

    void validate() const;
    double sample_rate() const { return 1.0 / (dt * record_decimation); }
};

struct StateSlice {
    std::string name;
    std::size_t offset = 0;
    std::size_t size = 0;
};

// Named partition of the flat state vector. Slices are contiguous and
// appended in order, so the layout always covers [0, size()) exactly.
class StateLayout {
   public:
    const StateSlice& add(std::string name, std::size_t size);
    const StateSlice& at(std::string_view name) const;
    const StateSlice* find(std::string_view name) const;
    // Slice containing flat index i.
    const StateSlice& owner(std::size_t i) const;
    std::size_t size() const { return total_; }
    const std::vector<StateSlice>& slices() const { return slices_; }

   private:
    std::vector<StateSlice> slices_;
    std::size_t total_ = 0;
};

struct SimState {
    double t = 0.0;
    Vec x;
    StateLayout layout;

    bool finite() const { return x.allFinite(); }
};

// Immutable restart point: the state together with whatever produced it.
template <class Model>
struct Snapshot {
    Model model;
    SimConfig config;
    SimState state;
};

// dx/dt = f(t, x). Implementations write into `dxdt`, which is pre-sized.
using Rhs = std::function<void(double t, const Vec& x, Vec& dxdt)>;
// Channels watched for steady state; writes into `out`.
using Monitor = std::function<void(double t, const Vec& x, std::vector<double>& out)>;

// Amplitude-invariant Park transform, d axis on cos(theta) of phase a.
std::array<double, 2> park(const std::array<double, 3>& abc, double theta);
std::array<double, 3> inverse_park(const std::array<double, 2>& dq, double theta);

// Classic fixed-step RK4 with scratch buffers owned by the object. Throws
// DivergenceError naming the offending slice when any stage derivative is
// not finite.
class Rk4 {
   public:
    explicit Rk4(std::size_t n = 0) { resize(n); }
    void resize(std::size_t n);
    void step(double& t, Vec& x, const Rhs& rhs, double dt, const StateLayout* layout = nullptr);

   private:
    Vec k1_, k2_, k3_, k4_, tmp_;
};

SimState step(const SimState& state, const Rhs& rhs, double dt);

struct SteadyCriteria {
    double window = 0.5;         // s, trailing window
    double tol = 1e-5;           // p.u. peak-to-peak
    double max_duration = 60.0;  // s of simulated time before giving up
    double min_time = 0.0;       // absolute time the result must not precede
};

// Integrates until every monitored channel varies by less than `tol`
// peak-to-peak over a trailing window. Throws SteadyStateTimeout.
SimState run_until_steady(SimState state, const Rhs& rhs, const Monitor& monitor,
                          const SteadyCriteria& criteria, double dt);

// Uniformly sampled record. Channel 0 of the CSV is time.
struct Trace {
    double t0 = 0.0;
    double fs = 1.0;
    std::vector<std::string> names;
    std::vector<std::vector<double>> channels;

    std::size_t size() const { return channels.empty() ? 0 : channels.front().size(); }
    double time(std::size_t n) const { return t0 + static_cast<double>(n) / fs; }
    const std::vector<double>& channel(std::string_view name) const;
    std::vector<double>& channel(std::string_view name);
    bool has(std::string_view name) const;
    void add_channel(std::string name);
};

void write_trace_csv(std::ostream& os, const Trace& trace);
Trace read_trace_csv(std::istream& is);

}  // namespace ibrscan
