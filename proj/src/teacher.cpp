#include "cdt/teacher.hpp"

#include <algorithm>
#include <numeric>
#include <utility>

#include "cdt/errors.hpp"
#include "cdt/inference.hpp"
#include "cdt/random.hpp"

namespace cdt {

std::string teacher_name(TeacherKind kind) {
  switch (kind) {
    case TeacherKind::TForest: return "t-forest";
    case TeacherKind::SGbt: return "s-gbt";
    case TeacherKind::RGbt: return "r-gbt";
    case TeacherKind::Noise: return "noise";
  }
  return "?";
}

TeacherKind teacher_from_name(const std::string& name) {
  if (name == "t-forest") return TeacherKind::TForest;
  if (name == "s-gbt") return TeacherKind::SGbt;
  if (name == "r-gbt") return TeacherKind::RGbt;
  if (name == "noise") return TeacherKind::Noise;
  throw DataError("unknown teacher '" + name +
                  "' (expected t-forest, s-gbt, r-gbt, or noise)");
}

namespace {

struct ArmIndex {
  std::vector<std::size_t> treated, control;
};

ArmIndex arms_of(const Dataset& ds) {
  ArmIndex a;
  for (std::size_t i = 0; i < ds.n; ++i)
    (ds.z[i] == 1 ? a.treated : a.control).push_back(i);
  return a;
}

// Half split stratified by arm. Validity (each half sees each arm) can only
// fail when an arm has a single unit; the contract still allows 100 fresh
// draws before giving up.
std::pair<std::vector<std::size_t>, std::vector<std::size_t>> stratified_halves(
    const ArmIndex& arms, std::uint64_t seed) {
  for (std::uint64_t attempt = 0; attempt < 100; ++attempt) {
    Rng rng(derive_seed(seed, {attempt}));
    std::vector<std::size_t> t = arms.treated, c = arms.control;
    rng.shuffle(t);
    rng.shuffle(c);
    std::vector<std::size_t> a, b;
    a.insert(a.end(), t.begin(), t.begin() + t.size() / 2);
    b.insert(b.end(), t.begin() + t.size() / 2, t.end());
    a.insert(a.end(), c.begin(), c.begin() + c.size() / 2);
    b.insert(b.end(), c.begin() + c.size() / 2, c.end());
    if (t.size() / 2 >= 1 && t.size() - t.size() / 2 >= 1 && c.size() / 2 >= 1 &&
        c.size() - c.size() / 2 >= 1) {
      std::sort(a.begin(), a.end());
      std::sort(b.begin(), b.end());
      return {std::move(a), std::move(b)};
    }
  }
  throw EstimationError(
      "an arm is empty in a cross-fit half even after 100 resampled splits");
}

TeacherOutput fit_t_forest(const Dataset& train, const ForestParams& fp,
                           std::uint64_t seed, std::size_t threads) {
  const ArmIndex arms = arms_of(train);
  if (arms.treated.empty() || arms.control.empty())
    throw EstimationError("training split is missing an arm");
  const Dataset d1 = train.subset(arms.treated);
  const Dataset d0 = train.subset(arms.control);

  ForestParams p1 = fp, p0 = fp;
  p1.seed = derive_seed(seed, {kTagArm, 1});
  p0.seed = derive_seed(seed, {kTagArm, 0});
  const Forest f1 = fit_forest(d1.x.data(), d1.n, d1.p, d1.y, p1, threads);
  const Forest f0 = fit_forest(d0.x.data(), d0.n, d0.p, d0.y, p0, threads);
  const OobResult o1 = oob_predict(f1, d1.x.data());
  const OobResult o0 = oob_predict(f0, d0.x.data());

  TeacherOutput out;
  out.tau_hat.assign(train.n, 0.0);
  out.oob_fallbacks = o1.fallback_count + o0.fallback_count;
  for (std::size_t k = 0; k < arms.treated.size(); ++k) {
    const std::size_t i = arms.treated[k];
    out.tau_hat[i] = o1.pred[k] - predict_forest_row(f0, train.row(i));
  }
  for (std::size_t k = 0; k < arms.control.size(); ++k) {
    const std::size_t i = arms.control[k];
    out.tau_hat[i] = predict_forest_row(f1, train.row(i)) - o0.pred[k];
  }
  return out;
}

// One S-learner model: GBT on [x, z]; the effect is f(x,1) - f(x,0).
GbtModel fit_s_model(const Dataset& train, const std::vector<std::size_t>& rows,
                     GbtParams params) {
  const std::size_t p = train.p;
  std::vector<double> xz(rows.size() * (p + 1));
  std::vector<double> y(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    std::copy(train.row(i), train.row(i) + p, xz.begin() + k * (p + 1));
    xz[k * (p + 1) + p] = static_cast<double>(train.z[i]);
    y[k] = train.y[i];
  }
  return fit_gbt(xz.data(), rows.size(), p + 1, y, params);
}

double s_model_effect(const GbtModel& model, const double* row, std::size_t p) {
  std::vector<double> buf(p + 1);
  std::copy(row, row + p, buf.begin());
  buf[p] = 1.0;
  const double f1 = model.predict_row(buf.data());
  buf[p] = 0.0;
  return f1 - model.predict_row(buf.data());
}

// The R-learner model for one cross-fit half: nuisances m(x) and e(x) are
// themselves cross-fitted over two stratified folds inside the half, then a
// weighted GBT is fit to the pseudo-outcomes.
GbtModel fit_r_model(const Dataset& train, const std::vector<std::size_t>& rows,
                     const TeacherSpec& spec, std::uint64_t seed) {
  const std::size_t p = train.p;
  ArmIndex arms;
  for (std::size_t i : rows) (train.z[i] == 1 ? arms.treated : arms.control).push_back(i);
  const auto [foldA, foldB] = stratified_halves(arms, derive_seed(seed, {0}));

  std::vector<double> mhat(train.n, 0.0), ehat(train.n, spec.propensity.known_e);
  const std::vector<std::size_t>* folds[2] = {&foldA, &foldB};
  for (int f = 0; f < 2; ++f) {
    const auto& fit_rows = *folds[1 - f];
    const auto& pred_rows = *folds[f];
    const Dataset dfit = train.subset(fit_rows);
    GbtParams mp = spec.gbt;
    mp.seed = derive_seed(seed, {1, static_cast<std::uint64_t>(f)});
    const GbtModel m = fit_gbt(dfit.x.data(), dfit.n, p, dfit.y, mp);
    for (std::size_t i : pred_rows) mhat[i] = m.predict_row(train.row(i));
    if (spec.propensity.estimate) {
      const PropensityFit pf = fit_propensity(dfit.x.data(), dfit.n, p, dfit.z);
      for (std::size_t i : pred_rows) ehat[i] = propensity_at(pf.coef, train.row(i), p);
    }
  }

  std::vector<double> xs(rows.size() * p), psi(rows.size()), w(rows.size());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    const std::size_t i = rows[k];
    std::copy(train.row(i), train.row(i) + p, xs.begin() + k * p);
    const double e = std::clamp(ehat[i], 0.01, 0.99);
    const double denom = static_cast<double>(train.z[i]) - e;
    psi[k] = (train.y[i] - mhat[i]) / denom;
    w[k] = denom * denom;
  }
  GbtParams tp = spec.gbt;
  tp.seed = derive_seed(seed, {2});
  return fit_gbt(xs.data(), rows.size(), p, psi, tp, &w);
}

TeacherOutput fit_cross_fitted(const Dataset& train, const TeacherSpec& spec,
                               std::uint64_t seed) {
  const ArmIndex arms = arms_of(train);
  if (arms.treated.empty() || arms.control.empty())
    throw EstimationError("training split is missing an arm");
  const std::size_t repeats = spec.cross_fit_repeats;
  if (repeats == 0) throw DataError("cross_fit_repeats must be positive");

  TeacherOutput out;
  out.tau_hat.assign(train.n, 0.0);
  for (std::size_t r = 0; r < repeats; ++r) {
    const auto [halfA, halfB] =
        stratified_halves(arms, derive_seed(seed, {kTagCrossFit, r, 0}));
    const std::vector<std::size_t>* halves[2] = {&halfA, &halfB};
    for (int h = 0; h < 2; ++h) {
      const auto& fit_rows = *halves[h];
      const auto& pred_rows = *halves[1 - h];
      const std::uint64_t model_seed =
          derive_seed(seed, {kTagCrossFit, r, 1, static_cast<std::uint64_t>(h)});
      if (spec.kind == TeacherKind::SGbt) {
        GbtParams gp = spec.gbt;
        gp.seed = model_seed;
        const GbtModel m = fit_s_model(train, fit_rows, gp);
        for (std::size_t i : pred_rows)
          out.tau_hat[i] += s_model_effect(m, train.row(i), train.p);
      } else {
        const GbtModel m = fit_r_model(train, fit_rows, spec, model_seed);
        for (std::size_t i : pred_rows) out.tau_hat[i] += m.predict_row(train.row(i));
      }
    }
  }
  for (double& t : out.tau_hat) t /= static_cast<double>(repeats);
  return out;
}

}  // namespace

TeacherOutput fit_teacher(const Dataset& train, const TeacherSpec& spec,
                          std::uint64_t seed, std::size_t threads) {
  switch (spec.kind) {
    case TeacherKind::TForest:
      return fit_t_forest(train, spec.forest, seed, threads);
    case TeacherKind::SGbt:
    case TeacherKind::RGbt:
      return fit_cross_fitted(train, spec, seed);
    case TeacherKind::Noise: {
      TeacherOutput out = fit_t_forest(train, spec.forest, seed, threads);
      Rng rng(derive_seed(seed, {kTagNoisePermute}));
      rng.shuffle(out.tau_hat);
      return out;
    }
  }
  throw DataError("unknown teacher kind");
}

}  // namespace cdt
