#include "rhem/covariates.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <set>

#include "rhem/combinatorics.hpp"
#include "rhem/error.hpp"

namespace rhem {

namespace {

struct KindInfo {
  CovariateKind kind;
  std::string_view tag;
};

constexpr std::array<KindInfo, 14> kKinds{{
    {CovariateKind::RecAvg, "rec_avg"},
    {CovariateKind::SendRecDiff, "send_rec_diff"},
    {CovariateKind::RecSetDiff, "rec_set_diff"},
    {CovariateKind::ExactRepetition, "exact_repetition"},
    {CovariateKind::UnorderedRepetition, "unordered_repetition"},
    {CovariateKind::RecSubRep, "rec_sub_rep"},
    {CovariateKind::SendRecSubRep, "send_rec_sub_rep"},
    {CovariateKind::InteractRec, "interact_rec"},
    {CovariateKind::Reciprocation, "reciprocation"},
    {CovariateKind::OutInPop, "out_in_pop"},
    {CovariateKind::TransitiveClosure, "transitive_closure"},
    {CovariateKind::CyclicClosure, "cyclic_closure"},
    {CovariateKind::InBalance, "in_balance"},
    {CovariateKind::OutBalance, "out_balance"},
}};

std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

void require_receivers(std::span<const ActorId> receivers) {
  if (receivers.empty()) throw Error(ErrorCode::EmptyReceiverSet, "covariate of an empty receiver set");
}

double attr(const Attribute& z, ActorId a) {
  if (a >= z.values.size())
    throw Error(ErrorCode::UnknownActor, "actor " + std::to_string(a) + " has no value for '" + z.name + "'");
  return z.values[a];
}

double difference(const Attribute& z, double a, double b) {
  return z.kind == AttributeKind::Categorical ? (a != b ? 1.0 : 0.0) : std::abs(a - b);
}

void require_order(std::size_t p, const HistoryState& hist) {
  if (p == 0) throw Error(ErrorCode::InvalidSpec, "subset order must be positive");
  if (p > hist.max_order())
    throw Error(ErrorCode::OrderExceeded, "order " + std::to_string(p) + " exceeds tracked order " +
                                              std::to_string(hist.max_order()));
}

/// Sum over third actors a not in {i, j} present in both sorted lists, of f(a).
template <class F>
double sum_common(std::span<const ActorId> first, std::span<const ActorId> second, ActorId i, ActorId j, F&& f) {
  double total = 0.0;
  auto x = first.begin();
  auto y = second.begin();
  while (x != first.end() && y != second.end()) {
    if (*x < *y) {
      ++x;
    } else if (*y < *x) {
      ++y;
    } else {
      if (*x != i && *x != j) total += f(*x);
      ++x;
      ++y;
    }
  }
  return total;
}

}  // namespace

std::string_view kind_tag(CovariateKind kind) {
  for (const auto& k : kKinds)
    if (k.kind == kind) return k.tag;
  return "unknown";
}

bool is_attribute_kind(CovariateKind kind) {
  return kind == CovariateKind::RecAvg || kind == CovariateKind::SendRecDiff || kind == CovariateKind::RecSetDiff;
}

bool is_order_kind(CovariateKind kind) {
  return kind == CovariateKind::RecSubRep || kind == CovariateKind::SendRecSubRep ||
         kind == CovariateKind::InteractRec;
}

std::string CovariateSpec::name() const {
  std::string out(kind_tag(kind));
  if (is_attribute_kind(kind)) out += "_" + attribute;
  if (is_order_kind(kind)) out += "_" + std::to_string(order);
  return out;
}

std::string CovariateSpec::to_string() const {
  std::string out(kind_tag(kind));
  if (is_attribute_kind(kind)) out += ":" + attribute;
  if (is_order_kind(kind)) out += ":" + std::to_string(order);
  if (transform == Transform::Sqrt) out += ",sqrt";
  return out;
}

CovariateSpec parse_covariate_spec(std::string_view text) {
  const std::string original(trim(text));
  std::string_view body = trim(text);
  CovariateSpec spec;
  if (const auto comma = body.find(','); comma != std::string_view::npos) {
    const auto flag = trim(body.substr(comma + 1));
    if (flag == "sqrt") spec.transform = Transform::Sqrt;
    else if (flag != "identity" && !flag.empty())
      throw Error(ErrorCode::InvalidSpec, "'" + original + "': unknown transform '" + std::string(flag) + "'");
    body = trim(body.substr(0, comma));
  }
  std::vector<std::string_view> parts;
  while (true) {
    const auto colon = body.find(':');
    parts.push_back(trim(body.substr(0, colon)));
    if (colon == std::string_view::npos) break;
    body.remove_prefix(colon + 1);
  }
  const auto it = std::find_if(kKinds.begin(), kKinds.end(), [&](const KindInfo& k) { return k.tag == parts[0]; });
  if (it == kKinds.end()) throw Error(ErrorCode::InvalidSpec, "'" + original + "': unknown covariate kind");
  spec.kind = it->kind;

  if (is_attribute_kind(spec.kind)) {
    if (parts.size() != 2 || parts[1].empty())
      throw Error(ErrorCode::InvalidSpec, "'" + original + "': expects kind:attribute");
    spec.attribute = std::string(parts[1]);
  } else if (is_order_kind(spec.kind)) {
    if (parts.size() != 2) throw Error(ErrorCode::InvalidSpec, "'" + original + "': expects kind:p");
    std::size_t p = 0;
    for (char c : parts[1]) {
      if (c < '0' || c > '9') throw Error(ErrorCode::InvalidSpec, "'" + original + "': order must be an integer");
      p = p * 10 + static_cast<std::size_t>(c - '0');
    }
    if (p == 0) throw Error(ErrorCode::InvalidSpec, "'" + original + "': order must be positive");
    spec.order = p;
  } else if (parts.size() != 1) {
    throw Error(ErrorCode::InvalidSpec, "'" + original + "': takes no parameters");
  }
  if (spec.transform == Transform::Sqrt && is_attribute_kind(spec.kind))
    throw Error(ErrorCode::InvalidSpec, "'" + original + "': sqrt applies to history covariates only");
  return spec;
}

std::vector<CovariateSpec> parse_covariate_specs(std::istream& in) {
  std::vector<CovariateSpec> specs;
  std::string line;
  while (std::getline(in, line)) {
    auto body = std::string_view(line);
    if (const auto hash = body.find('#'); hash != std::string_view::npos) body = body.substr(0, hash);
    if (trim(body).empty()) continue;
    specs.push_back(parse_covariate_spec(body));
  }
  return specs;
}

std::vector<CovariateSpec> parse_covariate_specs_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path);
  return parse_covariate_specs(in);
}

double rec_avg(const Attribute& z, ActorId, std::span<const ActorId> receivers) {
  require_receivers(receivers);
  if (z.kind != AttributeKind::Numeric)
    throw Error(ErrorCode::InvalidSpec, "rec_avg needs a numeric attribute, '" + z.name + "' is categorical");
  double sum = 0.0;
  for (ActorId j : receivers) sum += attr(z, j);
  return sum / static_cast<double>(receivers.size());
}

double send_rec_diff(const Attribute& z, ActorId sender, std::span<const ActorId> receivers) {
  require_receivers(receivers);
  const double zi = attr(z, sender);
  double sum = 0.0;
  for (ActorId j : receivers) sum += difference(z, zi, attr(z, j));
  return sum / static_cast<double>(receivers.size());
}

double rec_set_diff(const Attribute& z, ActorId, std::span<const ActorId> receivers) {
  require_receivers(receivers);
  const std::size_t n = receivers.size();
  if (n < 2) return 0.0;
  double sum = 0.0;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b) sum += difference(z, attr(z, receivers[a]), attr(z, receivers[b]));
  return sum / binomial(n, 2);
}

double exact_repetition(ActorId sender, std::span<const ActorId> receivers, double t, const HistoryState& hist) {
  return hist.exact_count(sender, receivers, t);
}

double unordered_repetition(ActorId sender, std::span<const ActorId> receivers, double t, const HistoryState& hist) {
  return hist.unordered_count(sender, receivers, t);
}

double rec_sub_rep(std::size_t p, ActorId, std::span<const ActorId> receivers, double t, const HistoryState& hist) {
  require_order(p, hist);
  if (receivers.size() < p) return 0.0;
  double sum = 0.0;
  ActorSet subset;
  for_each_combination(receivers, p, subset, [&](const ActorSet& s) { sum += hist.hy_deg_in(s, t); });
  return sum / binomial(receivers.size(), p);
}

double send_rec_sub_rep(std::size_t p, ActorId sender, std::span<const ActorId> receivers, double t,
                        const HistoryState& hist) {
  require_order(p, hist);
  if (receivers.size() < p) return 0.0;
  double sum = 0.0;
  ActorSet subset;
  for_each_combination(receivers, p, subset, [&](const ActorSet& s) { sum += hist.hy_deg(sender, s, t); });
  return sum / binomial(receivers.size(), p);
}

double interact_rec(std::size_t p, ActorId, std::span<const ActorId> receivers, double t, const HistoryState& hist) {
  require_order(p, hist);
  const std::size_t n = receivers.size();
  if (n == 0 || n - 1 < p) return 0.0;
  double sum = 0.0;
  ActorSet others;
  ActorSet subset;
  for (std::size_t k = 0; k < n; ++k) {
    const ActorId j = receivers[k];
    // skip senders that never sent anything
    if (hist.out_neighbors(j).empty()) continue;
    others.assign(receivers.begin(), receivers.end());
    others.erase(others.begin() + static_cast<std::ptrdiff_t>(k));
    for_each_combination(std::span<const ActorId>(others), p, subset,
                         [&](const ActorSet& s) { sum += hist.hy_deg(j, s, t); });
  }
  return sum / (static_cast<double>(n) * binomial(n - 1, p));
}

double reciprocation(ActorId sender, std::span<const ActorId> receivers, double t, const HistoryState& hist) {
  require_receivers(receivers);
  double sum = 0.0;
  for (ActorId j : receivers) sum += hist.dyad(j, sender, t);
  return sum / static_cast<double>(receivers.size());
}

double out_in_pop(ActorId, std::span<const ActorId> receivers, double t, const HistoryState& hist) {
  require_receivers(receivers);
  double sum = 0.0;
  for (ActorId j : receivers) sum += hist.deg_out(j, t);
  return sum / static_cast<double>(receivers.size());
}

double triadic(Triad kind, ActorId i, std::span<const ActorId> receivers, double t, const HistoryState& hist) {
  require_receivers(receivers);
  double sum = 0.0;
  for (ActorId j : receivers) {
    switch (kind) {
      case Triad::Transitive:  // i -> a -> j
        sum += sum_common(hist.out_neighbors(i), hist.in_neighbors(j), i, j, [&](ActorId a) {
          return std::min(hist.dyad(i, a, t), hist.dyad(a, j, t));
        });
        break;
      case Triad::Cyclic:  // a -> i, j -> a
        sum += sum_common(hist.in_neighbors(i), hist.out_neighbors(j), i, j, [&](ActorId a) {
          return std::min(hist.dyad(a, i, t), hist.dyad(j, a, t));
        });
        break;
      case Triad::InBalance:  // a -> i, a -> j
        sum += sum_common(hist.in_neighbors(i), hist.in_neighbors(j), i, j, [&](ActorId a) {
          return std::min(hist.dyad(a, i, t), hist.dyad(a, j, t));
        });
        break;
      case Triad::OutBalance:  // i -> a, j -> a
        sum += sum_common(hist.out_neighbors(i), hist.out_neighbors(j), i, j, [&](ActorId a) {
          return std::min(hist.dyad(i, a, t), hist.dyad(j, a, t));
        });
        break;
    }
  }
  return sum / static_cast<double>(receivers.size());
}

CovariateModel::CovariateModel(std::vector<CovariateSpec> specs, const AttributeTable& attributes,
                               std::size_t max_order)
    : specs_(std::move(specs)), max_order_(max_order) {
  std::set<std::string> names;
  columns_.resize(specs_.size());
  for (std::size_t k = 0; k < specs_.size(); ++k) {
    const auto& s = specs_[k];
    if (!names.insert(s.name()).second)
      throw Error(ErrorCode::InvalidSpec, "covariate '" + s.name() + "' listed twice");
    if (is_attribute_kind(s.kind)) {
      if (s.transform != Transform::Identity)
        throw Error(ErrorCode::InvalidSpec, "'" + s.name() + "': sqrt applies to history covariates only");
      columns_[k] = attributes.column(s.attribute);
      if (s.kind == CovariateKind::RecAvg && columns_[k].kind != AttributeKind::Numeric)
        throw Error(ErrorCode::InvalidSpec, "rec_avg needs a numeric attribute, '" + s.attribute + "' is categorical");
    }
    if (is_order_kind(s.kind)) {
      if (s.order == 0) throw Error(ErrorCode::InvalidSpec, "'" + s.name() + "': order must be positive");
      if (s.order > max_order_)
        throw Error(ErrorCode::OrderExceeded, "'" + s.name() + "' exceeds tracked order " + std::to_string(max_order_));
    }
  }
}

std::vector<std::string> CovariateModel::names() const {
  std::vector<std::string> out;
  out.reserve(specs_.size());
  for (const auto& s : specs_) out.push_back(s.name());
  return out;
}

std::size_t CovariateModel::required_order() const noexcept {
  std::size_t p = 1;
  for (const auto& s : specs_)
    if (is_order_kind(s.kind)) p = std::max(p, s.order);
  return p;
}

double CovariateModel::raw_value(std::size_t k, ActorId i, std::span<const ActorId> J, double t,
                                 const HistoryState& hist) const {
  const auto& s = specs_[k];
  switch (s.kind) {
    case CovariateKind::RecAvg: return rec_avg(columns_[k], i, J);
    case CovariateKind::SendRecDiff: return send_rec_diff(columns_[k], i, J);
    case CovariateKind::RecSetDiff: return rec_set_diff(columns_[k], i, J);
    case CovariateKind::ExactRepetition: return exact_repetition(i, J, t, hist);
    case CovariateKind::UnorderedRepetition: return unordered_repetition(i, J, t, hist);
    case CovariateKind::RecSubRep: return rec_sub_rep(s.order, i, J, t, hist);
    case CovariateKind::SendRecSubRep: return send_rec_sub_rep(s.order, i, J, t, hist);
    case CovariateKind::InteractRec: return interact_rec(s.order, i, J, t, hist);
    case CovariateKind::Reciprocation: return reciprocation(i, J, t, hist);
    case CovariateKind::OutInPop: return out_in_pop(i, J, t, hist);
    case CovariateKind::TransitiveClosure: return triadic(Triad::Transitive, i, J, t, hist);
    case CovariateKind::CyclicClosure: return triadic(Triad::Cyclic, i, J, t, hist);
    case CovariateKind::InBalance: return triadic(Triad::InBalance, i, J, t, hist);
    case CovariateKind::OutBalance: return triadic(Triad::OutBalance, i, J, t, hist);
  }
  return 0.0;
}

void CovariateModel::evaluate(ActorId sender, std::span<const ActorId> receivers, double t, const HistoryState& hist,
                              std::span<double> out) const {
  if (out.size() != specs_.size())
    throw Error(ErrorCode::DimensionMismatch, "output span does not match covariate count");
  require_receivers(receivers);
  ActorSet sorted;
  if (!std::is_sorted(receivers.begin(), receivers.end())) {
    sorted.assign(receivers.begin(), receivers.end());
    std::sort(sorted.begin(), sorted.end());
    receivers = sorted;
  }
  for (std::size_t k = 0; k < specs_.size(); ++k) {
    const double v = raw_value(k, sender, receivers, t, hist);
    out[k] = specs_[k].transform == Transform::Sqrt ? std::sqrt(std::max(0.0, v)) : v;
  }
}

std::vector<double> CovariateModel::evaluate(ActorId sender, std::span<const ActorId> receivers, double t,
                                             const HistoryState& hist) const {
  std::vector<double> out(specs_.size());
  evaluate(sender, receivers, t, hist, out);
  return out;
}

std::vector<double> evaluate(const std::vector<CovariateSpec>& specs, ActorId sender,
                             std::span<const ActorId> receivers, double t, const AttributeTable& attributes,
                             const HistoryState& hist) {
  return CovariateModel(specs, attributes, hist.max_order()).evaluate(sender, receivers, t, hist);
}

}  // namespace rhem
