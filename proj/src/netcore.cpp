#include "orchnet/netcore.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <map>

namespace orchnet {

ParamTensor::ParamTensor(std::string n, Index rows, Index cols, bool vector_shape)
    : name(std::move(n)),
      values(Eigen::MatrixXd::Zero(rows, cols)),
      grads(Eigen::MatrixXd::Zero(rows, cols)) {
  if (vector_shape) {
    shape = {rows * cols};
  } else {
    shape = {rows, cols};
  }
}

Linear::Linear(const std::string& name, Index in, Index out)
    : weight(name + ".weight", out, in), bias(name + ".bias", out, 1, true) {}

void Linear::init_he_uniform(Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(in_features()));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (Index j = 0; j < weight.values.cols(); ++j) {
    for (Index i = 0; i < weight.values.rows(); ++i) weight.values(i, j) = u(rng);
  }
  bias.values.setZero();
}

Eigen::MatrixXd Linear::backward(const Eigen::MatrixXd& upstream, const Eigen::MatrixXd& x) {
  if (upstream.rows() != out_features() || upstream.cols() != x.cols() || x.rows() != in_features()) {
    throw UsageError("linear backward: shape mismatch in " + weight.name);
  }
  weight.grads.noalias() += upstream * x.transpose();
  bias.grads += upstream.rowwise().sum();
  return weight.values.transpose() * upstream;
}

AdamW::AdamW(std::vector<ParamTensor*> params, AdamWConfig config)
    : params_(std::move(params)), config_(config) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (const ParamTensor* p : params_) {
    m_.push_back(Eigen::MatrixXd::Zero(p->values.rows(), p->values.cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->values.rows(), p->values.cols()));
  }
}

void AdamW::step() {
  for (const ParamTensor* p : params_) {
    if (!p->grads.allFinite()) throw NumericError("non-finite gradient in parameter " + p->name);
  }
  ++step_;
  const auto t = static_cast<double>(step_);
  const double bc1 = 1.0 - std::pow(config_.beta1, t);
  const double bc2 = 1.0 - std::pow(config_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ParamTensor& p = *params_[i];
    p.values *= (1.0 - config_.lr * config_.weight_decay);
    m_[i] = config_.beta1 * m_[i] + (1.0 - config_.beta1) * p.grads;
    v_[i] = config_.beta2 * v_[i] + (1.0 - config_.beta2) * p.grads.cwiseAbs2();
    p.values.array() -=
        config_.lr * (m_[i].array() / bc1) / ((v_[i].array() / bc2).sqrt() + config_.eps);
    p.zero_grad();
  }
}

namespace {

void put_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void put_f64(std::ostream& out, double v) {
  std::uint64_t bits = 0;
  std::memcpy(&bits, &v, sizeof bits);
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((bits >> (8 * i)) & 0xffu);
  out.write(reinterpret_cast<const char*>(b), 8);
}

bool get_u32(std::istream& in, std::uint32_t& v) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4)) return false;
  v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return true;
}

double get_f64(std::istream& in) {
  unsigned char b[8];
  if (!in.read(reinterpret_cast<char*>(b), 8)) throw DataError("truncated checkpoint");
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  double v = 0.0;
  std::memcpy(&v, &bits, sizeof v);
  return v;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const std::vector<const ParamTensor*>& params) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out.write("ORNN", 4);
  put_u32(out, kCheckpointVersion);
  for (const ParamTensor* p : params) {
    put_u32(out, static_cast<std::uint32_t>(p->name.size()));
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    put_u32(out, static_cast<std::uint32_t>(p->shape.size()));
    for (Index d : p->shape) put_u32(out, static_cast<std::uint32_t>(d));
    for (Index r = 0; r < p->values.rows(); ++r) {
      for (Index c = 0; c < p->values.cols(); ++c) put_f64(out, p->values(r, c));
    }
  }
  if (!out) throw DataError("write failed for checkpoint " + path.string());
}

void load_checkpoint(const std::filesystem::path& path, const std::vector<ParamTensor*>& params) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "ORNN", 4) != 0) {
    throw DataError(path.string() + " is not an ORNN checkpoint");
  }
  std::uint32_t version = 0;
  if (!get_u32(in, version) || version != kCheckpointVersion) {
    throw DataError("unsupported checkpoint version in " + path.string());
  }

  struct Record {
    std::vector<Index> shape;
    std::vector<double> values;
  };
  std::map<std::string, Record> records;
  std::uint32_t name_len = 0;
  while (get_u32(in, name_len)) {
    std::string name(name_len, '\0');
    if (!in.read(name.data(), name_len)) throw DataError("truncated checkpoint");
    std::uint32_t rank = 0;
    if (!get_u32(in, rank)) throw DataError("truncated checkpoint");
    Record rec;
    std::size_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      std::uint32_t d = 0;
      if (!get_u32(in, d)) throw DataError("truncated checkpoint");
      rec.shape.push_back(static_cast<Index>(d));
      count *= d;
    }
    rec.values.resize(count);
    for (double& v : rec.values) v = get_f64(in);
    records.emplace(std::move(name), std::move(rec));
  }

  for (ParamTensor* p : params) {
    const auto it = records.find(p->name);
    if (it == records.end()) throw DataError("checkpoint lacks parameter " + p->name);
    if (it->second.shape != p->shape) {
      throw DataError("checkpoint shape mismatch for parameter " + p->name);
    }
    std::size_t k = 0;
    for (Index r = 0; r < p->values.rows(); ++r) {
      for (Index c = 0; c < p->values.cols(); ++c) p->values(r, c) = it->second.values[k++];
    }
    p->zero_grad();
  }
}

}  // namespace orchnet
