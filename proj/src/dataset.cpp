#include "cdt/dataset.hpp"

#include <cmath>

#include "cdt/errors.hpp"

namespace cdt {

Dataset Dataset::subset(const std::vector<std::size_t>& rows) const {
  Dataset out;
  out.n = rows.size();
  out.p = p;
  out.columns = columns;
  out.x.reserve(out.n * p);
  out.y.reserve(out.n);
  out.z.reserve(out.n);
  if (!ids.empty()) out.ids.reserve(out.n);
  for (std::size_t i : rows) {
    out.x.insert(out.x.end(), x.begin() + i * p, x.begin() + (i + 1) * p);
    out.y.push_back(y[i]);
    out.z.push_back(z[i]);
    if (!ids.empty()) out.ids.push_back(ids[i]);
  }
  return out;
}

void validate_dataset(const Dataset& ds) {
  if (ds.n == 0) throw DataError("dataset is empty");
  if (ds.p == 0) throw DataError("dataset has no covariates");
  if (ds.x.size() != ds.n * ds.p)
    throw DataError("covariate matrix size does not match n*p");
  if (ds.y.size() != ds.n) throw DataError("outcome length does not match n");
  if (ds.z.size() != ds.n) throw DataError("treatment length does not match n");
  if (ds.columns.size() != ds.p)
    throw DataError("column name count does not match p");
  if (!ds.ids.empty() && ds.ids.size() != ds.n)
    throw DataError("id length does not match n");
  for (std::size_t i = 0; i < ds.n; ++i) {
    if (ds.z[i] != 0 && ds.z[i] != 1)
      throw DataError("treatment must be 0/1; row " + std::to_string(i + 1) +
                      " has " + std::to_string(ds.z[i]));
    if (!std::isfinite(ds.y[i]))
      throw DataError("non-finite outcome at row " + std::to_string(i + 1));
    for (std::size_t j = 0; j < ds.p; ++j)
      if (!std::isfinite(ds.xat(i, j)))
        throw DataError("non-finite covariate at row " + std::to_string(i + 1) +
                        ", column " + ds.columns[j]);
  }
}

}  // namespace cdt
