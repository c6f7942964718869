#include "maskcov/harness/model_spec.hpp"

#include "maskcov/harness/config.hpp"
#include "maskcov/harness/csv.hpp"

#include <cmath>

namespace maskcov::harness {

ModelSpec ModelSpec::parse(const std::string& text) {
  ModelSpec spec;
  spec.text_ = text;
  const auto parts = split_list(text, ':');
  if (parts.empty()) throw ConfigError("empty model specification");
  const std::string& head = parts[0];
  if (head == "ar1") {
    if (parts.size() != 2) throw ConfigError("model '" + text + "': expected ar1:RHO");
    spec.kind_ = ModelKind::ar1;
    spec.rho_ = parse_double(parts[1], "ar1 rho");
    if (!(std::abs(spec.rho_) < 1.0)) throw ConfigError("model '" + text + "': |rho| must be < 1");
  } else if (head == "star") {
    if (parts.size() != 3) throw ConfigError("model '" + text + "': expected star:BLOCKS:RHO");
    spec.kind_ = ModelKind::star_block;
    spec.blocks_ = static_cast<Index>(parse_int(parts[1], "star blocks"));
    if (spec.blocks_ < 1) throw ConfigError("model '" + text + "': blocks must be >= 1");
    if (parts[2] == "invsqrt") {
      spec.rho_invsqrt_ = true;
    } else {
      spec.rho_ = parse_double(parts[2], "star rho");
    }
  } else if (head == "identity") {
    spec.kind_ = ModelKind::ar1;
    spec.identity_ = true;
  } else if (head == "file") {
    const auto colon = text.find(':');
    spec.kind_ = ModelKind::custom;
    spec.path_ = text.substr(colon + 1);
    if (spec.path_.empty()) throw ConfigError("model '" + text + "': missing path");
  } else {
    throw ConfigError("unknown model kind '" + head + "' in '" + text + "'");
  }
  return spec;
}

double ModelSpec::rho(Index dim) const {
  if (identity_ || kind_ == ModelKind::custom) return 0.0;
  if (rho_invsqrt_) return 1.0 / std::sqrt(static_cast<double>(dim));
  return rho_;
}

CovarianceModel ModelSpec::build(Index dim) const {
  switch (kind_) {
    case ModelKind::ar1:
      return CovarianceModel::ar1(dim, rho(dim));
    case ModelKind::star_block:
      return CovarianceModel::star_block(dim, blocks_, rho(dim));
    case ModelKind::custom: {
      Matrix m = read_matrix_csv(path_);
      if (m.rows() != dim || m.cols() != dim)
        throw DimensionError("model file '" + path_ + "' is " + std::to_string(m.rows()) + "x" +
                             std::to_string(m.cols()) + ", expected " + std::to_string(dim));
      return CovarianceModel::custom(std::move(m));
    }
  }
  throw ConfigError("unreachable model kind");
}

CovarianceFactor ModelSpec::factor(Index dim, NoiseKind noise) const {
  if (identity_) return CovarianceFactor::identity(dim);
  if (kind_ == ModelKind::ar1 && noise == NoiseKind::gaussian) return CovarianceFactor::ar1(dim, rho(dim));
  return CovarianceFactor::dense(build(dim).matrix());
}

double ModelSpec::operator_norm(Index dim) const {
  if (identity_) return 1.0;
  if (kind_ == ModelKind::ar1) return ar1_operator_norm(dim, rho(dim));
  return build(dim).metrics().op_norm;
}

Vector ModelSpec::diagonal(Index dim) const {
  if (kind_ == ModelKind::custom) return build(dim).matrix().diagonal();
  return Vector::Ones(dim);
}

}  // namespace maskcov::harness
