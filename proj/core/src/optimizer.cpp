#include "mim/optimizer.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <mutex>
#include <thread>

#if defined(__GLIBC__)
#include <malloc.h>
#endif

namespace mim::opt {

NonFiniteGradient::NonFiniteGradient(std::uint64_t step, std::size_t index)
    : std::runtime_error("non-finite gradient at step " + std::to_string(step) + ", parameter " +
                         std::to_string(index)),
      step_(step),
      index_(index) {}

void adam_step(AdamState& s, std::span<double> params, std::span<const double> grad) {
  const std::size_t n = params.size();
  if (grad.size() != n || s.m.size() != n || s.v.size() != n) {
    throw std::invalid_argument("adam_step: length mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(grad[i])) throw NonFiniteGradient(s.k + 1, i);
  }
  const AdamConfig& c = s.config;
  const double k = static_cast<double>(++s.k);
  const double c1 = 1.0 - std::pow(c.beta1, k);
  const double c2 = 1.0 - std::pow(c.beta2, k);
  for (std::size_t i = 0; i < n; ++i) {
    s.m[i] = c.beta1 * s.m[i] + (1.0 - c.beta1) * grad[i];
    s.v[i] = c.beta2 * s.v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    const double mh = s.m[i] / c1;
    const double vh = s.v[i] / c2;
    params[i] -= c.alpha * mh / (std::sqrt(vh) + c.eps);
  }
}

int resolve_threads(int requested) {
  if (requested > 0) return requested;
  if (const char* env = std::getenv("MIM_THREADS")) {
    const int t = std::atoi(env);
    if (t > 0) return t;
  }
  return 1;
}

void tune_allocator() {
#if defined(__GLIBC__)
  static std::once_flag once;
  std::call_once(once, [] {
    mallopt(M_TRIM_THRESHOLD, 512 << 20);
    mallopt(M_MMAP_THRESHOLD, 256 << 20);
  });
#endif
}

namespace {

constexpr const char* kNotFinite = "loss is not finite";

struct Chunk {
  int set;
  ad::Index c0;
  ad::Index n;
};

std::vector<Chunk> split(const loss::Objective& obj, const loss::Batch& b, ad::Index chunk) {
  if (chunk < 1) throw std::invalid_argument("chunk size must be positive");
  std::vector<Chunk> out;
  for (int set = 0; set < obj.set_count(); ++set) {
    const ad::Index size = obj.set_size(b, set);
    for (ad::Index c0 = 0; c0 < size; c0 += chunk) out.push_back({set, c0, std::min(chunk, size - c0)});
  }
  return out;
}

// Runs `work(chunk index, tape)` over all chunks on `threads` workers, each
// with its own tape. The first exception is rethrown after the join.
template <typename Work>
void for_chunks(const loss::Objective& obj, std::span<const double> params, std::size_t count,
                int threads, Work&& work) {
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto worker = [&] {
    ad::Tape tape(params, obj.trial().bundle().blocks());
    tape.set_finite_checks(false);
    for (std::size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        tape.clear();
        work(i, tape);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
        next = count;
      }
    }
  };
  const int t = std::min<int>(threads, static_cast<int>(count));
  if (t <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (int k = 0; k < t; ++k) pool.emplace_back(worker);
  }
  if (error) std::rethrow_exception(error);
}

}  // namespace

LossGrad loss_and_gradient(const loss::Objective& obj, std::span<const double> params,
                           const loss::Batch& b, const EvalOptions& options) {
  const auto chunks = split(obj, b, options.chunk);
  std::vector<double> losses(chunks.size());
  std::vector<std::vector<double>> grads(chunks.size());
  for_chunks(obj, params, chunks.size(), resolve_threads(options.threads),
             [&](std::size_t i, ad::Tape& tape) {
               const Chunk& c = chunks[i];
               const ad::Var l = obj.partial(tape, b, c.set, c.c0, c.n);
               losses[i] = l.scalar();
               grads[i] = tape.gradient(l);
             });
  LossGrad out{0.0, std::vector<double>(params.size(), 0.0)};
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    out.loss += losses[i];
    for (std::size_t j = 0; j < params.size(); ++j) out.grad[j] += grads[i][j];
  }
  return out;
}

double loss_value(const loss::Objective& obj, std::span<const double> params, const loss::Batch& b,
                  const EvalOptions& options) {
  const auto chunks = split(obj, b, options.chunk);
  std::vector<double> losses(chunks.size());
  for_chunks(obj, params, chunks.size(), resolve_threads(options.threads),
             [&](std::size_t i, ad::Tape& tape) {
               const Chunk& c = chunks[i];
               losses[i] = obj.partial(tape, b, c.set, c.c0, c.n).scalar();
             });
  double sum = 0.0;
  for (double l : losses) sum += l;
  return sum;
}

TrainResult train(const loss::Objective& obj, std::vector<double> params, const ad::Matrix& eval_x,
                  const ad::Matrix& eval_u, const TrainConfig& cfg,
                  const std::function<void(const EvalRow&)>& on_row) {
  if (params.size() != obj.trial().parameter_count()) {
    throw std::invalid_argument("train: parameter vector has the wrong length");
  }
  if (cfg.eval_interval < 1) throw std::invalid_argument("train: eval_interval must be positive");
  tune_allocator();
  const auto start = std::chrono::steady_clock::now();
  const ad::Index eval_chunk = std::max<ad::Index>(cfg.eval.chunk, 1024);

  TrainResult r;
  AdamState state(params.size(), cfg.adam);
  loss::Batch frozen;
  auto batch_for = [&](std::uint64_t epoch) {
    if (cfg.freeze_samples) {
      if (epoch == 0) {
        Rng rng = make_rng(cfg.seed, {kSamplingStream, 0});
        frozen = obj.sample(rng);
      }
      return frozen;
    }
    Rng rng = make_rng(cfg.seed, {kSamplingStream, epoch});
    return obj.sample(rng);
  };
  auto record = [&](std::uint64_t epoch, double loss) {
    EvalRow row{epoch, loss, loss::relative_l2_error(obj.trial(), params, eval_x, eval_u, eval_chunk)};
    r.rows.push_back(row);
    if (on_row) on_row(row);
  };
  // Parameters before the latest step, restored when the step produced a
  // non-finite loss.
  std::vector<double> previous = params;
  auto fail = [&](std::uint64_t epoch, const std::string& why) {
    if (why == kNotFinite) params = previous;
    r.diverged = true;
    r.message = "diverged at epoch " + std::to_string(epoch) + ": " + why;
  };

  for (std::uint64_t epoch = 0;; ++epoch) {
    const loss::Batch b = batch_for(epoch);
    const bool last = epoch == cfg.max_epochs;
    const bool due = last || epoch % cfg.eval_interval == 0;
    if (last) {
      double l = 0.0;
      try {
        l = loss_value(obj, params, b, cfg.eval);
      } catch (const std::runtime_error& e) {
        fail(epoch, e.what());
        break;
      }
      if (!std::isfinite(l)) {
        fail(epoch, kNotFinite);
        break;
      }
      record(epoch, l);
      r.epochs = epoch;
      break;
    }
    LossGrad lg;
    try {
      lg = loss_and_gradient(obj, params, b, cfg.eval);
    } catch (const std::runtime_error& e) {
      fail(epoch, e.what());
      break;
    }
    if (!std::isfinite(lg.loss)) {
      fail(epoch, kNotFinite);
      break;
    }
    if (due) record(epoch, lg.loss);
    previous = params;
    try {
      adam_step(state, params, lg.grad);
    } catch (const NonFiniteGradient& e) {
      fail(epoch, e.what());
      break;
    }
    r.epochs = epoch + 1;
  }
  r.params = std::move(params);
  r.final_error = r.rows.empty() ? NAN : r.rows.back().rel_l2;
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

}  // namespace mim::opt
