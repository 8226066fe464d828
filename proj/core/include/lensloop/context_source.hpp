#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lensloop/contextualizer.hpp"
#include "lensloop/records.hpp"

namespace lensloop {

class Gateway;

/// Something that turns a raw observation into contextualized candidates.
class ContextSource {
 public:
  virtual ~ContextSource() = default;

  /// Returns deduplicated candidates; multiplicities add up to at most n.
  virtual std::vector<Candidate> sample(const CtxRequest& request, int n, double temperature) = 0;
  /// Short label recorded in manifests and reports, e.g. "model:ctx".
  virtual std::string describe() const = 0;
};

/// A chat backend prompted with the standard (or self) contextualization
/// prompt, switching to the retry prompt when the request carries a hint.
class ModelContextSource final : public ContextSource {
 public:
  ModelContextSource(Gateway& gateway, std::string backend_id, CtxSourceKind style = CtxSourceKind::Model);

  std::vector<Candidate> sample(const CtxRequest& request, int n, double temperature) override;
  std::string describe() const override;
  const std::string& backend_id() const { return backend_id_; }

 private:
  Gateway& gateway_;
  std::string backend_id_;
  CtxSourceKind style_;
};

/// Replays stored targets keyed by the SHA-256 of the observation text. Unseen
/// observations and hinted requests go to the fallback; without one, unseen
/// observations throw AllUnparsable.
class ExemplarContextSource final : public ContextSource {
 public:
  ExemplarContextSource(std::span<const SftRecord> records, std::shared_ptr<ContextSource> fallback,
                        std::string label = "exemplar");
  /// Loads an exemplar store written by the Exemplar trainer.
  static std::shared_ptr<ExemplarContextSource> from_file(const std::filesystem::path& path,
                                                          std::shared_ptr<ContextSource> fallback);

  std::vector<Candidate> sample(const CtxRequest& request, int n, double temperature) override;
  std::string describe() const override;

  std::size_t size() const { return index_.size(); }
  /// Stored target for an observation, if any.
  const ContextualizedObservation* lookup(std::string_view observation) const;

 private:
  std::map<std::string, ContextualizedObservation> index_;
  std::shared_ptr<ContextSource> fallback_;
  std::string label_;
};

}  // namespace lensloop
