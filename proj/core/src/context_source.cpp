#include "lensloop/context_source.hpp"

#include "lensloop/datastore.hpp"
#include "lensloop/error.hpp"
#include "lensloop/hashing.hpp"

namespace lensloop {

ModelContextSource::ModelContextSource(Gateway& gateway, std::string backend_id, CtxSourceKind style)
    : gateway_(gateway), backend_id_(std::move(backend_id)), style_(style) {
  if (style_ == CtxSourceKind::Exemplar) throw Error(ErrorCode::ConfigError, "model source cannot use exemplar style");
}

std::vector<Candidate> ModelContextSource::sample(const CtxRequest& request, int n, double temperature) {
  return sample_candidates(gateway_, request, backend_id_, n, temperature, style_);
}

std::string ModelContextSource::describe() const {
  return std::string(to_string(style_)) + ":" + backend_id_;
}

ExemplarContextSource::ExemplarContextSource(std::span<const SftRecord> records,
                                             std::shared_ptr<ContextSource> fallback, std::string label)
    : fallback_(std::move(fallback)), label_(std::move(label)) {
  for (const auto& record : records) {
    const std::string key = sha256_hex(record.observation);
    if (index_.count(key)) continue;  // first record wins
    ContextualizedObservation obs;
    try {
      obs = parse_contextualization(record.target);
    } catch (const Error&) {
      continue;
    }
    obs.source = CtxSourceTag{CtxSourceKind::Exemplar, {}};
    index_.emplace(key, std::move(obs));
  }
}

std::shared_ptr<ExemplarContextSource> ExemplarContextSource::from_file(const std::filesystem::path& path,
                                                                        std::shared_ptr<ContextSource> fallback) {
  const std::vector<SftRecord> records = load_records(path);
  return std::make_shared<ExemplarContextSource>(records, std::move(fallback), "exemplar:" + path.string());
}

const ContextualizedObservation* ExemplarContextSource::lookup(std::string_view observation) const {
  const auto it = index_.find(sha256_hex(observation));
  return it == index_.end() ? nullptr : &it->second;
}

std::vector<Candidate> ExemplarContextSource::sample(const CtxRequest& request, int n, double temperature) {
  if (n < 1) throw Error(ErrorCode::ConfigError, "candidate count must be at least 1");
  if (request.hint_action && fallback_) return fallback_->sample(request, n, temperature);
  if (const auto* hit = lookup(request.observation)) return {Candidate{*hit, n}};
  if (fallback_) return fallback_->sample(request, n, temperature);
  throw Error(ErrorCode::AllUnparsable, "no exemplar for this observation and no fallback source");
}

std::string ExemplarContextSource::describe() const { return label_; }

}  // namespace lensloop
