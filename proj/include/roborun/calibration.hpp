#pragma once

#include "roborun/governor.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <stdexcept>
#include <vector>

namespace roborun {

/// Runs one stage at (precision, volume) and returns its latency in seconds.
using StageExecutor = std::function<double(double p, double v)>;

struct KnobGrid {
    std::vector<double> precisions{0.3, 0.6, 1.2, 2.4, 4.8, 9.6};
    /// Volume levels per stage expressed in voxels at the cell's precision
    /// (v = count · p³), so each cell does comparable geometric work.
    std::array<std::vector<double>, 3> voxel_counts{
        std::vector<double>{10000, 20000, 30000, 40000},
        std::vector<double>{10000, 20000, 30000, 40000},
        std::vector<double>{2000, 4000, 6000, 8000},
    };
    int repetitions = 5;
};

struct CalibrationConfig {
    KnobGrid grid;
    /// q3 held fixed during the fit (the volume factor is otherwise not identifiable).
    double fit_q3 = 1.0;
    /// Multiplier folded into the stored q3; maps this machine's kernel times onto
    /// the simulated platform's compute speed. 1 keeps measured seconds.
    double latency_scale = 40.0;
    double mse_limit = 0.08;
};

struct CalibrationResult {
    LatencyModel model;
    /// Raw measurements (latency_s in measured seconds).
    std::vector<LatencySample> samples;
    std::vector<int> sample_rep;
    std::array<StageFit, 3> fits;
};

class CalibrationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// The real pipeline kernels on synthetic self-similar workloads.
std::array<StageExecutor, 3> real_executors();

/// Fits every stage on the per-cell median latency. Throws CalibrationError (with
/// the worst cells) when the overall relative MSE reaches cfg.mse_limit.
CalibrationResult calibrate(const std::array<StageExecutor, 3>& executors, const CalibrationConfig& cfg);

/// stage,p,v,rep,latency_s
void write_calibration_csv(std::ostream& os, const CalibrationResult& r);

}  // namespace roborun
