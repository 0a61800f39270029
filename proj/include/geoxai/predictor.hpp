/*
 * Copyright 2026 The GeoXAI Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <concepts>
#include <cstddef>
#include <functional>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "geoxai/error.hpp"
#include "geoxai/matrix.hpp"

namespace geoxai {

// Anything that maps a batch of rows to one prediction per row. Calls must be
// deterministic and must not mutate observable state.
template <class P>
concept BatchPredictor = requires(const P& p, const Matrix& rows) {
  { p.predict(rows) } -> std::convertible_to<std::vector<double>>;
  { p.arity() } -> std::convertible_to<std::size_t>;
};

// Type-erased predictor. A predictor declared serial has every call funneled
// through one lock (e.g. a single bridge connection).
class Predictor {
 public:
  Predictor() = default;

  template <BatchPredictor P>
    requires(!std::same_as<std::decay_t<P>, Predictor>)
  explicit Predictor(P impl, bool serial = false)
      : impl_(std::make_shared<Model<P>>(std::move(impl))),
        lock_(serial ? std::make_shared<std::mutex>() : nullptr) {}

  template <BatchPredictor P>
  static Predictor shared(std::shared_ptr<const P> impl, bool serial = false) {
    Predictor out;
    out.impl_ = std::make_shared<SharedModel<P>>(std::move(impl));
    if (serial) out.lock_ = std::make_shared<std::mutex>();
    return out;
  }

  std::vector<double> predict(const Matrix& rows) const {
    if (!impl_) throw Error(ErrorCode::kPredictorFailure, "empty predictor");
    if (rows.rows() > 0 && rows.cols() != impl_->arity())
      throw Error(ErrorCode::kArityMismatch, "predictor expects " +
                                                 std::to_string(impl_->arity()) +
                                                 " columns, got " + std::to_string(rows.cols()));
    if (lock_) {
      std::lock_guard guard(*lock_);
      return impl_->predict(rows);
    }
    return impl_->predict(rows);
  }

  std::size_t arity() const { return impl_ ? impl_->arity() : 0; }
  bool serial() const { return lock_ != nullptr; }

 private:
  struct Concept {
    virtual ~Concept() = default;
    virtual std::vector<double> predict(const Matrix& rows) const = 0;
    virtual std::size_t arity() const = 0;
  };
  template <class P>
  struct Model final : Concept {
    explicit Model(P p) : impl(std::move(p)) {}
    std::vector<double> predict(const Matrix& rows) const override { return impl.predict(rows); }
    std::size_t arity() const override { return impl.arity(); }
    P impl;
  };
  template <class P>
  struct SharedModel final : Concept {
    explicit SharedModel(std::shared_ptr<const P> p) : impl(std::move(p)) {}
    std::vector<double> predict(const Matrix& rows) const override { return impl->predict(rows); }
    std::size_t arity() const override { return impl->arity(); }
    std::shared_ptr<const P> impl;
  };

  std::shared_ptr<const Concept> impl_;
  std::shared_ptr<std::mutex> lock_;
};

// Row-wise function adapter, mostly for analytic test models.
class FunctionPredictor {
 public:
  using RowFn = std::function<double(std::span<const double>)>;

  FunctionPredictor(std::size_t arity, RowFn fn) : arity_(arity), fn_(std::move(fn)) {}

  std::vector<double> predict(const Matrix& rows) const {
    std::vector<double> out(rows.rows());
    for (std::size_t r = 0; r < rows.rows(); ++r) out[r] = fn_(rows.row(r));
    return out;
  }
  std::size_t arity() const { return arity_; }

 private:
  std::size_t arity_;
  RowFn fn_;
};

}  // namespace geoxai
