#pragma once

#include <Eigen/Core>

#include "spcboot/chart.hpp"

namespace spcboot {

struct MarkovConfig {
  int grid_points = 75;
  // Repeat on a grid with twice as many cells and extrapolate the O(w^2) error away.
  bool richardson = false;
};

/// Substochastic transition matrix of the discretised CUSUM on [0, c).
///
/// State 0 is the reflecting atom S = 0 and collects P(next <= 0). The
/// remaining grid_points - 1 states are the cells ((k-1)w, kw] of (0, c) with
/// w = c / (grid_points - 1), each represented by its midpoint. Mass at or
/// above c is absorbed. Atoms on an interior boundary fall into the lower cell.
Eigen::MatrixXd markov_transition(const UpdateDistribution& update, double threshold, const MarkovConfig& cfg);

/// In-control ARL from S_0 = 0, solving (I - Q) a = 1 by dense LU.
/// Throws NonAbsorbing when the system is numerically singular.
double arl_markov(const UpdateDistribution& update, double threshold, const MarkovConfig& cfg);

/// P(tau <= horizon) from S_0 = 0.
double hit_markov(const UpdateDistribution& update, double threshold, long horizon, const MarkovConfig& cfg);

}  // namespace spcboot
