#include <doctest.h>

#include "risim/sensing.hpp"

using namespace risim;

namespace {

SceneConfig sensing_scene(int ris_side, int bs_side, double range = 12.0) {
  SceneConfig scene;
  scene.bs_m_x = bs_side;
  scene.bs_m_z = bs_side;
  scene.ris_m_x = ris_side;
  scene.ris_m_z = ris_side;
  scene.ue_positions = {{-range / std::sqrt(2.0), range / std::sqrt(2.0), 0.0}};
  return scene;
}

// Noise-free observation via the flattened form a(ue)^T diag(vec P) a(bs->ris),
// an independent route to the same bilinear snapshot model.
VectorC flattened_rx(const ChannelState& state, const SensingSetup& setup, int ue) {
  Complex scale = rx_scale(state, setup, ue);
  VectorC out(setup.snapshots());
  for (int t = 0; t < setup.snapshots(); ++t) {
    VectorC pv = setup.phase_sequence[t].vec();
    out[t] = scale *
             state.a_ue[ue].full.cwiseProduct(pv).cwiseProduct(state.a_ris.full).sum();
  }
  return out;
}

}  // namespace

TEST_CASE("noise variance components") {
  SUBCASE("thermal level from the default parameters") {
    SceneConfig scene = sensing_scene(2, 2);
    CHECK(scene.awgn_power_w() == doctest::Approx(2.512e-15).epsilon(1e-3));
  }
  SUBCASE("no fluctuation terms without scattering") {
    SceneConfig scene = sensing_scene(2, 2);
    scene.rician_bs_ris = 0.0;
    scene.rician_ris_ue = 0.0;
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);
    NoiseVariance nv = setup.noise[0];
    CHECK(nv.bs_nlos_ue_los == 0.0);
    CHECK(nv.bs_los_ue_nlos == 0.0);
    double rho = state.gains.cascade_nlos_power[0];
    CHECK(nv.both_nlos == doctest::Approx(setup.pilot.squaredNorm() * rho).epsilon(1e-12));
  }
  SUBCASE("beamformed pilot maximizes the mixed term") {
    SceneConfig scene = sensing_scene(2, 3);
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);
    const int m_b = scene.bs_m_x * scene.bs_m_z;
    double coherent = std::norm(state.a_bs.full.cwiseProduct(setup.pilot).sum());
    CHECK(coherent == doctest::Approx(scene.bs_power_w * m_b).epsilon(1e-12));
    CHECK(setup.pilot.squaredNorm() == doctest::Approx(scene.bs_power_w).epsilon(1e-12));
    CHECK_NOTHROW(setup.validate(scene));
  }
  SUBCASE("pure LOS leaves thermal noise only") {
    SceneConfig scene = sensing_scene(2, 2);
    scene.pure_los = true;
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);
    CHECK(setup.noise[0].total == doctest::Approx(scene.awgn_power_w()));
  }
}

TEST_CASE("noise-free observation model") {
  SUBCASE("bilinear form equals the flattened form") {
    SceneConfig scene = sensing_scene(3, 2);
    scene.sensing_duration_s = 1e-4;  // 10 snapshots
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);
    VectorC bilinear = noiseless_rx(scene, state, setup, 0);
    VectorC flat = flattened_rx(state, setup, 0);
    CHECK((bilinear - flat).norm() < 1e-10 * flat.norm());
  }
  SUBCASE("single reflecting element") {
    SceneConfig scene = sensing_scene(1, 2);
    scene.sensing_duration_s = 5e-5;
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);
    VectorC rx = noiseless_rx(scene, state, setup, 0);
    Complex scale = rx_scale(state, setup, 0);
    for (int t = 0; t < setup.snapshots(); ++t) {
      Complex expected = scale * setup.phase_sequence[t].profile(0, 0) *
                         state.a_ris.full[0] * state.a_ue[0].full[0];
      CHECK(std::abs(rx[t] - expected) < 1e-12 * std::abs(expected));
    }
  }
  SUBCASE("constant profile gives a constant observation") {
    SceneConfig scene = sensing_scene(3, 2);
    scene.sensing_duration_s = 1e-4;
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);
    for (auto& p : setup.phase_sequence) p = setup.phase_sequence[0];
    VectorC rx = noiseless_rx(scene, state, setup, 0);
    for (int t = 1; t < setup.snapshots(); ++t)
      CHECK(std::abs(rx[t] - rx[0]) < 1e-12 * std::abs(rx[0]));
  }
}

TEST_CASE("sensing simulation") {
  SceneConfig scene = sensing_scene(2, 2);
  scene.sensing_duration_s = 1e-4;
  ChannelState state = make_channel_state(scene);
  SensingSetup setup = make_sensing_setup(scene, state);
  VectorC mean = noiseless_rx(scene, state, setup, 0);

  SUBCASE("zero variance returns the mean") {
    SensingSetup quiet = setup;
    quiet.noise[0].total = 0.0;
    Rng rng(4);
    VectorC rx = simulate_sensing(scene, state, quiet, 0, rng);
    CHECK((rx - mean).norm() == doctest::Approx(0.0));
  }
  SUBCASE("sample variance matches the configured level") {
    Rng rng(31);
    const int draws = 2000;  // x10 snapshots
    double acc = 0.0;
    for (int d = 0; d < draws; ++d) {
      VectorC rx = simulate_sensing(scene, state, setup, 0, rng);
      acc += (rx - mean).squaredNorm();
    }
    double sample_var = acc / (draws * setup.snapshots());
    CHECK(std::abs(sample_var - setup.noise[0].total) / setup.noise[0].total < 0.02);
  }
}

TEST_CASE("physical-cascade audit of the Gaussian model") {
  // Arrays large enough that the modelled fluctuation terms dominate the
  // approximation error; thermal noise turned far down to expose them.
  SceneConfig scene = sensing_scene(4, 5);
  scene.noise_density_w_hz = dbm_to_watt(-224.0);
  scene.sensing_duration_s = 5e-4;  // 50 snapshots
  ChannelState state = make_channel_state(scene);
  SensingSetup setup = make_sensing_setup(scene, state);
  VectorC mean = noiseless_rx(scene, state, setup, 0);

  Rng rng(71);
  const int trials = 1000;
  double acc = 0.0;
  for (int d = 0; d < trials; ++d) {
    VectorC rx = simulate_sensing(scene, state, setup, 0, rng, SensingMode::kFullChannel);
    acc += (rx - mean).squaredNorm();
  }
  double sample_var = acc / (double(trials) * setup.snapshots());
  CHECK(std::abs(sample_var - setup.noise[0].total) / setup.noise[0].total < 0.10);
}

TEST_CASE("channel-parameter information matrix") {
  SUBCASE("matches a finite-difference build on random deployments") {
    Rng scene_rng(101);
    for (int trial = 0; trial < 5; ++trial) {
      SceneConfig scene = sensing_scene(4, 3);
      scene.sensing_duration_s = 2e-4;  // 20 snapshots
      scene.rician_bs_ris = scene_rng.uniform(5.0, 80.0);
      scene.rician_ris_ue = scene_rng.uniform(5.0, 80.0);
      scene.ue_positions = {{scene_rng.uniform(-25.0, -4.0), scene_rng.uniform(4.0, 25.0), 0.0}};
      scene.sensing_phase_seed = 7000 + trial;
      ChannelState state = make_channel_state(scene);
      SensingSetup setup = make_sensing_setup(scene, state);

      Eigen::Matrix4d analytic = fim_channel(scene, state, setup, 0);

      // Forward model as a function of (azimuth, elevation, Re gain, Im gain).
      const VectorC bs_proj = state.los_bs_ris * setup.pilot;
      const Upa ris = scene.ris_upa();
      auto forward = [&](double az, double el, Complex beta) {
        SteeringVector a = steering_vector(ris, {az, el}, scene.wavelength());
        VectorC out(setup.snapshots());
        for (int t = 0; t < setup.snapshots(); ++t)
          out[t] = beta *
                   a.full.cwiseProduct(setup.phase_sequence[t].vec()).cwiseProduct(bs_proj).sum();
        return out;
      };
      const Angle psi = state.ue_aod[0];
      const Complex beta = state.gains.ris_ue_los[0];
      const double h = 1e-6;
      MatrixC grads(setup.snapshots(), 4);
      grads.col(0) =
          (forward(psi.azimuth + h, psi.elevation, beta) -
           forward(psi.azimuth - h, psi.elevation, beta)) / (2 * h);
      grads.col(1) =
          (forward(psi.azimuth, psi.elevation + h, beta) -
           forward(psi.azimuth, psi.elevation - h, beta)) / (2 * h);
      grads.col(2) = (forward(psi.azimuth, psi.elevation, beta + h) -
                      forward(psi.azimuth, psi.elevation, beta - h)) / (2 * h);
      grads.col(3) = (forward(psi.azimuth, psi.elevation, beta + Complex(0, h)) -
                      forward(psi.azimuth, psi.elevation, beta - Complex(0, h))) / (2 * h);
      Eigen::Matrix4d fd = Eigen::Matrix4d::Zero();
      for (int t = 0; t < setup.snapshots(); ++t) {
        Eigen::Vector4cd g = grads.row(t).transpose();
        fd += (g * g.adjoint()).real();
      }
      fd *= 2.0 / setup.noise[0].total;

      double scale = fd.cwiseAbs().maxCoeff();
      for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
          double denom = std::max(std::abs(fd(r, c)), 1e-9 * scale);
          CHECK(std::abs(analytic(r, c) - fd(r, c)) / denom < 1e-4);
        }
    }
  }

  SUBCASE("doubling the snapshot sequence doubles the information") {
    SceneConfig scene = sensing_scene(3, 2);
    scene.sensing_duration_s = 1e-4;
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);
    Eigen::Matrix4d once = fim_channel(scene, state, setup, 0);
    SensingSetup twice = setup;
    twice.phase_sequence.insert(twice.phase_sequence.end(), setup.phase_sequence.begin(),
                                setup.phase_sequence.end());
    Eigen::Matrix4d doubled = fim_channel(scene, state, twice, 0);
    CHECK((doubled - 2.0 * once).norm() < 1e-12 * once.norm());
  }

  SUBCASE("symmetric positive semidefinite") {
    SceneConfig scene = sensing_scene(4, 2);
    scene.sensing_duration_s = 1e-4;
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);
    Eigen::Matrix4d fim = fim_channel(scene, state, setup, 0);
    CHECK((fim - fim.transpose()).norm() < 1e-12 * fim.norm());
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> es(fim);
    CHECK(es.eigenvalues().minCoeff() > -1e-9 * fim.trace());
  }

  SUBCASE("zero noise variance is rejected") {
    SceneConfig scene = sensing_scene(2, 2);
    scene.sensing_duration_s = 1e-4;
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);
    setup.noise[0].total = 0.0;
    CHECK_THROWS_AS(fim_channel(scene, state, setup, 0), std::invalid_argument);
  }
}

TEST_CASE("location jacobian") {
  SUBCASE("matches finite differences of the angle map") {
    Rng rng(7);
    for (int trial = 0; trial < 6; ++trial) {
      SceneConfig scene = sensing_scene(2, 2);
      double yaw = rng.uniform(-1.0, 1.0);
      scene.ris_rotation << std::cos(yaw), -std::sin(yaw), 0, std::sin(yaw), std::cos(yaw), 0,
          0, 0, 1;
      scene.ue_positions = {{rng.uniform(-25.0, -4.0), rng.uniform(4.0, 25.0), 0.0}};
      ChannelState state = make_channel_state(scene);
      Eigen::Matrix4d jac = jacobian_location(scene, state, 0);

      const double h = 1e-6;
      for (int axis = 0; axis < 2; ++axis) {
        Vector3 hi = scene.ue_positions[0], lo = scene.ue_positions[0];
        hi[axis] += h;
        lo[axis] -= h;
        Spherical vh = cart_to_local_spherical(hi, scene.ris_frame());
        Spherical vl = cart_to_local_spherical(lo, scene.ris_frame());
        double fd_az = (vh.azimuth - vl.azimuth) / (2 * h);
        double fd_el = (vh.elevation - vl.elevation) / (2 * h);
        CHECK(std::abs(jac(0, axis) - fd_az) / std::abs(fd_az) < 1e-4);
        CHECK(std::abs(jac(1, axis) - fd_el) / std::abs(fd_el) < 1e-4);
      }
      // gain block untouched by position
      CHECK(jac(2, 2) == 1.0);
      CHECK(jac(3, 3) == 1.0);
      CHECK(jac.block<2, 2>(2, 0).norm() == 0.0);
      CHECK(jac.block<2, 2>(0, 2).norm() == 0.0);
    }
  }

  SUBCASE("axis-aligned UE") {
    SceneConfig scene = sensing_scene(2, 2);
    scene.ue_positions = {{7.0, 0.0, 0.0}};
    ChannelState state = make_channel_state(scene);
    Eigen::Matrix4d jac = jacobian_location(scene, state, 0);
    CHECK(jac(0, 0) == doctest::Approx(0.0));
    CHECK(jac(0, 1) == doctest::Approx(1.0 / 7.0));
  }

  SUBCASE("UE under the array axis is rejected") {
    SceneConfig scene = sensing_scene(2, 2);
    scene.ue_positions = {{0.0, 0.0, 0.0}};
    ChannelState state = make_channel_state(scene);
    CHECK_THROWS_AS(jacobian_location(scene, state, 0), std::runtime_error);
  }
}

TEST_CASE("position error bound") {
  SUBCASE("more reflecting elements tighten the bound") {
    double previous = std::numeric_limits<double>::infinity();
    for (int side : {2, 4, 6}) {
      SceneConfig scene = sensing_scene(side, 2);
      scene.sensing_duration_s = 1e-4;
      ChannelState state = make_channel_state(scene);
      SensingSetup setup = make_sensing_setup(scene, state);
      FimResult fim = crb(scene, state, setup, 0);
      CHECK(fim.crb_position < previous);
      CHECK(fim.crb_position > 0.0);
      previous = fim.crb_position;
    }
  }
  SUBCASE("a constant profile sequence is unidentifiable") {
    SceneConfig scene = sensing_scene(3, 2);
    scene.sensing_duration_s = 1e-4;
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);
    for (auto& p : setup.phase_sequence) p = setup.phase_sequence[0];
    CHECK_THROWS_AS(crb(scene, state, setup, 0), std::runtime_error);
  }
  SUBCASE("position bound composes the blocks") {
    SceneConfig scene = sensing_scene(4, 2);
    scene.sensing_duration_s = 1e-4;
    ChannelState state = make_channel_state(scene);
    SensingSetup setup = make_sensing_setup(scene, state);
    FimResult fim = crb(scene, state, setup, 0);
    Eigen::Matrix4d expected =
        fim.location_jacobian.transpose() * fim.channel_fim * fim.location_jacobian;
    CHECK((fim.location_fim - expected).norm() < 1e-12 * expected.norm());
    CHECK(fim.crb_position ==
          doctest::Approx(std::sqrt(fim.position_error.trace())).epsilon(1e-12));
  }
}

TEST_CASE("offline transform dictionary") {
  const double lambda = 0.0107;
  Upa ris = Upa::make(3, 2, lambda / 2);
  Angle ris_aoa{kPi / 4, 1.7};
  std::vector<PhaseProfile> seq = random_phase_sequence(3, 2, 3, 99);

  SUBCASE("matches a direct transform sum") {
    IfftDictionary dict = ifft_dictionary(ris, ris_aoa, seq, 8, 4, lambda);
    CHECK(dict.atoms.rows() == 3);
    CHECK(dict.atoms.cols() == 32);
    SteeringVector a = steering_vector(ris, ris_aoa, lambda);
    for (int t = 0; t < 3; ++t) {
      for (int m = 0; m < 8; ++m) {
        for (int n = 0; n < 4; ++n) {
          Complex sum = 0.0;
          for (int k = 0; k < 3; ++k)
            for (int l = 0; l < 2; ++l)
              sum += std::polar(1.0, 2.0 * kPi * (m * k / 8.0 + n * l / 4.0)) *
                     seq[t].profile(k, l) * a.x[k] * a.z[l];
          sum /= 8.0 * 4.0;
          CHECK(std::abs(dict.atoms(t, m * 4 + n) - sum) < 1e-12);
        }
      }
    }
  }

  SUBCASE("recomputation is bitwise identical") {
    IfftDictionary a = ifft_dictionary(ris, ris_aoa, seq, 8, 4, lambda);
    IfftDictionary b = ifft_dictionary(ris, ris_aoa, seq, 8, 4, lambda);
    CHECK((a.atoms - b.atoms).norm() == 0.0);
  }

  SUBCASE("transform smaller than the array is rejected") {
    CHECK_THROWS_AS(ifft_dictionary(ris, ris_aoa, seq, 2, 4, lambda), std::invalid_argument);
  }

  SUBCASE("conjugate profile gives separable geometric sums") {
    SteeringVector a = steering_vector(ris, ris_aoa, lambda);
    MatrixC response = a.x * a.z.transpose();
    std::vector<PhaseProfile> ones_seq(1);
    ones_seq[0].profile = response.conjugate();
    IfftDictionary dict = ifft_dictionary(ris, ris_aoa, ones_seq, 8, 4, lambda);
    auto geometric = [](int m, int fft, int count) {
      Complex sum = 0.0;
      for (int k = 0; k < count; ++k) sum += std::polar(1.0, 2.0 * kPi * m * k / fft);
      return sum / double(fft);
    };
    for (int m = 0; m < 8; ++m)
      for (int n = 0; n < 4; ++n)
        CHECK(std::abs(dict.atoms(0, m * 4 + n) - geometric(m, 8, 3) * geometric(n, 4, 2)) <
              1e-12);
  }
}

TEST_CASE("on-grid direction is collinear with its dictionary bin") {
  SceneConfig scene = sensing_scene(4, 2);
  scene.sensing_duration_s = 1e-4;
  const int fft = 16;
  ChannelState state = make_channel_state(scene);
  SensingSetup setup = make_sensing_setup(scene, state);
  SensingModel model = make_sensing_model(scene, state, setup);
  IfftDictionary dict = ifft_dictionary(scene, state, setup, fft);

  // Integer congruence indices for the x/z phase increments, then the
  // direction they encode; the matching dictionary bin sits at the negated
  // index modulo the transform size.
  const int m_star = 3, n_star = 13;
  double w1 = bin_to_cosine((fft - m_star) % fft, fft, dict.spacing, dict.wavelength);
  double w3 = bin_to_cosine((fft - n_star) % fft, fft, dict.spacing, dict.wavelength);
  REQUIRE(w1 * w1 + w3 * w3 < 1.0);
  Angle psi{std::atan2(std::sqrt(1.0 - w1 * w1 - w3 * w3), w1), std::acos(w3)};

  VectorC response = model.model_vector(psi);
  int bin = ((fft - m_star) % fft) * fft + ((fft - n_star) % fft);
  VectorC atom = dict.atoms.col(bin);
  double cosine = std::abs(atom.dot(response)) / (atom.norm() * response.norm());
  CHECK(cosine == doctest::Approx(1.0).epsilon(1e-10));

  // ratio constant across snapshots
  Complex ratio = response[0] / atom[0];
  for (int t = 1; t < model.snapshots(); ++t)
    CHECK(std::abs(response[t] / atom[t] - ratio) < 1e-9 * std::abs(ratio));
}

TEST_CASE("grid search") {
  SceneConfig scene = sensing_scene(4, 2);
  scene.sensing_duration_s = 1e-4;
  const int fft = 16;
  ChannelState state = make_channel_state(scene);
  SensingSetup setup = make_sensing_setup(scene, state);
  IfftDictionary dict = ifft_dictionary(scene, state, setup, fft);

  SUBCASE("an atom matches itself exactly") {
    VectorC rx = dict.atoms.col(37);
    GridSearchResult gs = grid_search(rx, dict);
    CHECK(gs.m * fft + gs.n == 37);
    CHECK(gs.surface(gs.m, gs.n) <= 1e-28 * rx.squaredNorm());
  }

  SUBCASE("noiseless on-grid observation pins its bin") {
    SensingModel model = make_sensing_model(scene, state, setup);
    const int m_dict = 5, n_dict = 12;
    double w1 = bin_to_cosine(m_dict, fft, dict.spacing, dict.wavelength);
    double w3 = bin_to_cosine(n_dict, fft, dict.spacing, dict.wavelength);
    REQUIRE(w1 * w1 + w3 * w3 < 1.0);
    Angle psi{std::atan2(std::sqrt(1.0 - w1 * w1 - w3 * w3), w1), std::acos(w3)};
    VectorC rx = Complex(3e-7, -1e-7) * model.model_vector(psi);
    GridSearchResult gs = grid_search(rx, dict);
    CHECK(gs.m == m_dict);
    CHECK(gs.n == n_dict);
    CHECK(gs.surface(gs.m, gs.n) < 1e-18 * rx.squaredNorm());
  }

  SUBCASE("residuals never exceed the observation energy") {
    Rng rng(12);
    VectorC rx(dict.atoms.rows());
    for (Eigen::Index t = 0; t < rx.size(); ++t) rx[t] = rng.cgaussian(1.0);
    GridSearchResult gs = grid_search(rx, dict);
    CHECK(gs.surface.maxCoeff() <= rx.squaredNorm());
    CHECK(gs.surface.minCoeff() >= 0.0);
  }
}

TEST_CASE("refinement") {
  SceneConfig scene = sensing_scene(4, 2);
  scene.sensing_duration_s = 1e-4;
  const int fft = 16;
  ChannelState state = make_channel_state(scene);
  SensingSetup setup = make_sensing_setup(scene, state);
  SensingModel model = make_sensing_model(scene, state, setup);
  IfftDictionary dict = ifft_dictionary(scene, state, setup, fft);

  SUBCASE("symmetric neighbors keep the integer bin") {
    VectorC rx = dict.atoms.col(5 * fft + 7);
    Eigen::MatrixXd surface = Eigen::MatrixXd::Constant(fft, fft, 2.0);
    surface(5, 7) = 1.0;  // equal neighbors on both sides
    EstimateResult est = refine(rx, surface, 5, 7, dict, model);
    CHECK(est.refined_m == doctest::Approx(5.0));
    CHECK(est.refined_n == doctest::Approx(7.0));
  }

  SUBCASE("exact parabola recovers the vertex") {
    VectorC rx = dict.atoms.col(5 * fft + 7);
    Eigen::MatrixXd surface = Eigen::MatrixXd::Constant(fft, fft, 100.0);
    const double vm = 5.3, vn = 6.8;  // vertices in bin units
    for (int dm = -1; dm <= 1; ++dm) surface(5 + dm, 7) = 2.0 * std::pow(5 + dm - vm, 2) + 1.0;
    // both axis parabolas share the center sample
    for (int dn = -1; dn <= 1; ++dn)
      surface(5, 7 + dn) = 3.0 * std::pow(7 + dn - vn, 2) + surface(5, 7) -
                           3.0 * std::pow(7 - vn, 2);
    EstimateResult est = refine(rx, surface, 5, 7, dict, model);
    CHECK(est.refined_m == doctest::Approx(vm).epsilon(1e-12));
    CHECK(est.refined_n == doctest::Approx(vn).epsilon(1e-12));
    CHECK(est.refined_m >= 4.0);
    CHECK(est.refined_m <= 6.0);
  }
}

TEST_CASE("locate") {
  SceneConfig scene = sensing_scene(2, 2);
  SUBCASE("straight down") {
    Vector3 p = locate({0.0, kPi}, scene, 0.0);
    CHECK(p.norm() < 1e-12);
  }
  SUBCASE("round trip through the angle map") {
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      Vector3 ue{rng.uniform(-25, -3), rng.uniform(3, 25), 0.0};
      Spherical view = cart_to_local_spherical(ue, scene.ris_frame());
      Vector3 back = locate({view.azimuth, view.elevation}, scene, 0.0);
      CHECK((back - ue).norm() < 1e-9);
    }
  }
  SUBCASE("grazing elevation is rejected") {
    CHECK_THROWS_AS(locate({0.5, kPi / 2}, scene, 0.0), std::runtime_error);
  }
}

TEST_CASE("noiseless pipeline recovers off-grid directions") {
  SceneConfig scene = sensing_scene(16, 3);
  ChannelState state = make_channel_state(scene);
  SensingSetup setup = make_sensing_setup(scene, state);
  SensingModel model = make_sensing_model(scene, state, setup);
  IfftDictionary dict = ifft_dictionary(scene, state, setup, 64);

  Rng rng(123);
  for (int trial = 0; trial < 4; ++trial) {
    SceneConfig moved = scene;
    moved.ue_positions = {{rng.uniform(-25.0, -4.0), rng.uniform(4.0, 25.0), 0.0}};
    ChannelState moved_state = make_channel_state(moved);
    SensingSetup moved_setup = setup;
    moved_setup.noise = {noise_variance(moved, moved_state, 0, setup.pilot)};
    VectorC rx = noiseless_rx(moved, moved_state, moved_setup, 0);
    EstimateResult est = estimate_position(rx, dict, model, moved, 0.0);
    CHECK(std::abs(est.refined.azimuth - moved_state.ue_aod[0].azimuth) < 1e-6);
    CHECK(std::abs(est.refined.elevation - moved_state.ue_aod[0].elevation) < 1e-6);
    CHECK((est.position - moved.ue_positions[0]).norm() < 1e-3);
    CHECK(est.refined.azimuth > 0.0);
    CHECK(est.refined.azimuth < kPi);
    CHECK(est.refined_m >= est.grid_m - 1.0);
    CHECK(est.refined_m <= est.grid_m + 1.0);
  }
}

TEST_CASE("dense-grid baseline") {
  SceneConfig scene = sensing_scene(8, 2);
  scene.sensing_duration_s = 1e-4;
  const int fft = 32;
  ChannelState state = make_channel_state(scene);
  SensingSetup setup = make_sensing_setup(scene, state);
  SensingModel model = make_sensing_model(scene, state, setup);
  IfftDictionary dict = ifft_dictionary(scene, state, setup, fft);

  VectorC rx = noiseless_rx(scene, state, setup, 0);
  EstimateResult fast = estimate_position(rx, dict, model, scene, 0.0);
  EstimateResult dense = mle_baseline(rx, model, scene, 0.0, 2 * fft);

  CHECK(std::abs(fast.refined.azimuth - dense.refined.azimuth) < 1e-8);
  CHECK(std::abs(fast.refined.elevation - dense.refined.elevation) < 1e-8);
  // the dense grid re-evaluates the model everywhere; the transform path
  // amortizes it offline
  CHECK(dense.elapsed_s > fast.elapsed_s);
  CHECK_THROWS_AS(mle_baseline(rx, model, scene, 0.0, 1), std::invalid_argument);
}
