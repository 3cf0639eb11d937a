/* SPDX-FileCopyrightText: 2026 GaussianSSC Authors
 *
 * SPDX-License-Identifier: Apache-2.0 */

#include "gssc/ops.hpp"
#include "gssc/error.hpp"
#include "gssc/parallel.hpp"

#include <cblas.h>
#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace gssc::ops {

    namespace {

        Tape& tape_of(Var v) {
            if (!v.valid())
                throw Error("invalid variable handle");
            return *v.tape;
        }

        void require_matrix(const NdBuffer& b, const char* what) {
            if (b.rank() != 2)
                throw DimensionError(fmt::format("{}: expected a matrix, got {}", what, shape_string(b.shape())));
        }

        // Row blocks have a fixed size so a block's result never depends on the
        // worker count; BLAS itself runs single-threaded inside each block.
        constexpr std::size_t kGemmBlock = 256;

        const bool kBlasSerial = [] {
            openblas_set_num_threads(1);
            return true;
        }();

        // c[M x N] += op(a)[M x K] * op(b)[K x N]
        void gemm(bool ta, bool tb, const double* a, const double* b, double* c, std::size_t m, std::size_t k,
                  std::size_t n) {
            (void)kBlasSerial;
            if (m == 0 || n == 0 || k == 0)
                return;
            const std::size_t lda = ta ? m : k, ldb = tb ? k : n;
            const std::size_t blocks = (m + kGemmBlock - 1) / kGemmBlock;
            parallel_for(blocks, [&](std::size_t lo, std::size_t hi) {
                for (std::size_t blk = lo; blk < hi; ++blk) {
                    const std::size_t r0 = blk * kGemmBlock, rows = std::min(kGemmBlock, m - r0);
                    const double* ab = ta ? a + r0 : a + r0 * lda;
                    cblas_dgemm(CblasRowMajor, ta ? CblasTrans : CblasNoTrans, tb ? CblasTrans : CblasNoTrans,
                                static_cast<int>(rows), static_cast<int>(n), static_cast<int>(k), 1.0, ab,
                                static_cast<int>(lda), b, static_cast<int>(ldb), 1.0, c + r0 * n, static_cast<int>(n));
                }
            }, 1);
        }

        // Stable bucket order of entries by row: offsets[R + 1], order[M].
        struct RowBuckets {
            std::vector<std::size_t> offsets;
            std::vector<std::size_t> order;
        };

        RowBuckets bucket_rows(const std::vector<std::int32_t>& rows, std::size_t row_count) {
            RowBuckets b;
            b.offsets.assign(row_count + 1, 0);
            for (auto r : rows)
                ++b.offsets[static_cast<std::size_t>(r) + 1];
            for (std::size_t r = 0; r < row_count; ++r)
                b.offsets[r + 1] += b.offsets[r];
            b.order.resize(rows.size());
            std::vector<std::size_t> cursor(b.offsets.begin(), b.offsets.end() - 1);
            for (std::size_t i = 0; i < rows.size(); ++i)
                b.order[cursor[static_cast<std::size_t>(rows[i])]++] = i;
            return b;
        }

        // out[rows[i], :] += src[i, :] accumulated in input order per row.
        void accumulate_rows_ordered(const NdBuffer& src, const std::vector<std::int32_t>& rows, NdBuffer& out) {
            const std::size_t c = src.cols();
            const RowBuckets b = bucket_rows(rows, out.rows());
            parallel_for(out.rows(), [&](std::size_t lo, std::size_t hi) {
                for (std::size_t r = lo; r < hi; ++r) {
                    double* orow = out.ptr() + r * c;
                    for (std::size_t k = b.offsets[r]; k < b.offsets[r + 1]; ++k) {
                        const double* srow = src.ptr() + b.order[k] * c;
                        for (std::size_t j = 0; j < c; ++j)
                            orow[j] += srow[j];
                    }
                }
            });
        }

        template <class Fwd, class Deriv>
        Var unary(const char* name, Var x, Fwd fwd, Deriv deriv) {
            const NdBuffer& xv = x.value();
            NdBuffer y(xv.shape());
            for (std::size_t i = 0; i < xv.size(); ++i)
                y[i] = fwd(xv[i]);
            NdBuffer saved_y = y;
            return tape_of(x).record(name, std::move(y), {x},
                                     [x, deriv, saved_y = std::move(saved_y)](Tape& t, const NdBuffer& g) {
                                         NdBuffer* gx = t.grad_slot(x);
                                         if (!gx)
                                             return;
                                         const NdBuffer& xv = t.value(x);
                                         for (std::size_t i = 0; i < xv.size(); ++i)
                                             (*gx)[i] += g[i] * deriv(xv[i], saved_y[i]);
                                     });
        }

        double sigmoid_scalar(double x) {
            if (x >= 0.0)
                return 1.0 / (1.0 + std::exp(-x));
            const double e = std::exp(x);
            return e / (1.0 + e);
        }

        double softplus_scalar(double x) {
            return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
        }

    } // namespace

    Var matmul(Var a, Var b) {
        const NdBuffer& av = a.value();
        const NdBuffer& bv = b.value();
        require_matrix(av, "matmul lhs");
        require_matrix(bv, "matmul rhs");
        if (av.dim(1) != bv.dim(0))
            throw DimensionError(fmt::format("matmul: inner dimensions disagree, {} x {}",
                                             shape_string(av.shape()), shape_string(bv.shape())));
        const std::size_t m = av.dim(0), k = av.dim(1), n = bv.dim(1);
        NdBuffer out({m, n}, 0.0);
        gemm(false, false, av.ptr(), bv.ptr(), out.ptr(), m, k, n);
        return tape_of(a).record("matmul", std::move(out), {a, b}, [a, b, m, k, n](Tape& t, const NdBuffer& g) {
            if (NdBuffer* ga = t.grad_slot(a)) {
                // dA = G * B^T
                gemm(false, true, g.ptr(), t.value(b).ptr(), ga->ptr(), m, n, k);
            }
            if (NdBuffer* gb = t.grad_slot(b)) {
                // dB = A^T * G
                gemm(true, false, t.value(a).ptr(), g.ptr(), gb->ptr(), k, m, n);
            }
        });
    }

    Var add(Var a, Var b) {
        require_same_shape(a.value(), b.value(), "add");
        NdBuffer out = a.value();
        const NdBuffer& bv = b.value();
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] += bv[i];
        return tape_of(a).record("add", std::move(out), {a, b}, [a, b](Tape& t, const NdBuffer& g) {
            for (Var v : {a, b})
                if (NdBuffer* gv = t.grad_slot(v))
                    for (std::size_t i = 0; i < g.size(); ++i)
                        (*gv)[i] += g[i];
        });
    }

    Var sub(Var a, Var b) {
        require_same_shape(a.value(), b.value(), "sub");
        NdBuffer out = a.value();
        const NdBuffer& bv = b.value();
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] -= bv[i];
        return tape_of(a).record("sub", std::move(out), {a, b}, [a, b](Tape& t, const NdBuffer& g) {
            if (NdBuffer* ga = t.grad_slot(a))
                for (std::size_t i = 0; i < g.size(); ++i)
                    (*ga)[i] += g[i];
            if (NdBuffer* gb = t.grad_slot(b))
                for (std::size_t i = 0; i < g.size(); ++i)
                    (*gb)[i] -= g[i];
        });
    }

    Var mul(Var a, Var b) {
        require_same_shape(a.value(), b.value(), "mul");
        NdBuffer out = a.value();
        const NdBuffer& bv = b.value();
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] *= bv[i];
        return tape_of(a).record("mul", std::move(out), {a, b}, [a, b](Tape& t, const NdBuffer& g) {
            if (NdBuffer* ga = t.grad_slot(a)) {
                const NdBuffer& bv = t.value(b);
                for (std::size_t i = 0; i < g.size(); ++i)
                    (*ga)[i] += g[i] * bv[i];
            }
            if (NdBuffer* gb = t.grad_slot(b)) {
                const NdBuffer& av = t.value(a);
                for (std::size_t i = 0; i < g.size(); ++i)
                    (*gb)[i] += g[i] * av[i];
            }
        });
    }

    Var scale(Var a, double factor) {
        NdBuffer out = a.value();
        for (auto& v : out.storage())
            v *= factor;
        return tape_of(a).record("scale", std::move(out), {a}, [a, factor](Tape& t, const NdBuffer& g) {
            if (NdBuffer* ga = t.grad_slot(a))
                for (std::size_t i = 0; i < g.size(); ++i)
                    (*ga)[i] += g[i] * factor;
        });
    }

    Var add_scalar(Var a, double offset) {
        NdBuffer out = a.value();
        for (auto& v : out.storage())
            v += offset;
        return tape_of(a).record("add_scalar", std::move(out), {a}, [a](Tape& t, const NdBuffer& g) {
            if (NdBuffer* ga = t.grad_slot(a))
                for (std::size_t i = 0; i < g.size(); ++i)
                    (*ga)[i] += g[i];
        });
    }

    Var add_bias(Var x, Var bias) {
        const NdBuffer& xv = x.value();
        const NdBuffer& bv = bias.value();
        const std::size_t c = xv.cols();
        if (bv.size() != c)
            throw DimensionError(fmt::format("add_bias: bias {} does not match channels of {}",
                                             shape_string(bv.shape()), shape_string(xv.shape())));
        NdBuffer out = xv;
        const std::size_t n = xv.rows();
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j)
                out[i * c + j] += bv[j];
        return tape_of(x).record("add_bias", std::move(out), {x, bias}, [x, bias, n, c](Tape& t, const NdBuffer& g) {
            if (NdBuffer* gx = t.grad_slot(x))
                for (std::size_t i = 0; i < g.size(); ++i)
                    (*gx)[i] += g[i];
            if (NdBuffer* gb = t.grad_slot(bias))
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < c; ++j)
                        (*gb)[j] += g[i * c + j];
        });
    }

    Var mul_rows(Var x, Var row_scale) {
        const NdBuffer& xv = x.value();
        const NdBuffer& sv = row_scale.value();
        const std::size_t n = xv.rows(), c = xv.cols();
        if (sv.size() != n)
            throw DimensionError(fmt::format("mul_rows: scale {} does not match rows of {}",
                                             shape_string(sv.shape()), shape_string(xv.shape())));
        NdBuffer out = xv;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = 0; j < c; ++j)
                out[i * c + j] *= sv[i];
        return tape_of(x).record("mul_rows", std::move(out), {x, row_scale},
                                 [x, row_scale, n, c](Tape& t, const NdBuffer& g) {
                                     if (NdBuffer* gx = t.grad_slot(x)) {
                                         const NdBuffer& sv = t.value(row_scale);
                                         for (std::size_t i = 0; i < n; ++i)
                                             for (std::size_t j = 0; j < c; ++j)
                                                 (*gx)[i * c + j] += g[i * c + j] * sv[i];
                                     }
                                     if (NdBuffer* gs = t.grad_slot(row_scale)) {
                                         const NdBuffer& xv = t.value(x);
                                         for (std::size_t i = 0; i < n; ++i) {
                                             double acc = 0.0;
                                             for (std::size_t j = 0; j < c; ++j)
                                                 acc += g[i * c + j] * xv[i * c + j];
                                             (*gs)[i] += acc;
                                         }
                                     }
                                 });
    }

    Var concat_cols(const std::vector<Var>& parts) {
        if (parts.empty())
            throw DimensionError("concat_cols: no inputs");
        const std::size_t n = parts.front().value().rows();
        std::vector<std::size_t> widths;
        std::size_t total = 0;
        for (const Var& p : parts) {
            if (p.value().rows() != n)
                throw DimensionError(fmt::format("concat_cols: row mismatch {} vs {}",
                                                 shape_string(parts.front().shape()), shape_string(p.shape())));
            widths.push_back(p.value().cols());
            total += widths.back();
        }
        NdBuffer out({n, total});
        std::size_t offset = 0;
        for (std::size_t k = 0; k < parts.size(); ++k) {
            const NdBuffer& pv = parts[k].value();
            for (std::size_t i = 0; i < n; ++i)
                std::copy_n(pv.ptr() + i * widths[k], widths[k], out.ptr() + i * total + offset);
            offset += widths[k];
        }
        return tape_of(parts.front()).record("concat_cols", std::move(out), parts,
                                             [parts, widths, n, total](Tape& t, const NdBuffer& g) {
                                                 std::size_t offset = 0;
                                                 for (std::size_t k = 0; k < parts.size(); ++k) {
                                                     if (NdBuffer* gp = t.grad_slot(parts[k]))
                                                         for (std::size_t i = 0; i < n; ++i)
                                                             for (std::size_t j = 0; j < widths[k]; ++j)
                                                                 (*gp)[i * widths[k] + j] += g[i * total + offset + j];
                                                     offset += widths[k];
                                                 }
                                             });
    }

    Var slice_cols(Var x, std::size_t begin, std::size_t count) {
        const NdBuffer& xv = x.value();
        const std::size_t n = xv.rows(), c = xv.cols();
        if (count == 0 || begin + count > c)
            throw DimensionError(fmt::format("slice_cols: [{}, {}) out of {} columns", begin, begin + count, c));
        NdBuffer out({n, count});
        for (std::size_t i = 0; i < n; ++i)
            std::copy_n(xv.ptr() + i * c + begin, count, out.ptr() + i * count);
        return tape_of(x).record("slice_cols", std::move(out), {x}, [x, begin, count, n, c](Tape& t, const NdBuffer& g) {
            if (NdBuffer* gx = t.grad_slot(x))
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < count; ++j)
                        (*gx)[i * c + begin + j] += g[i * count + j];
        });
    }

    Var reshape(Var x, Shape shape) {
        NdBuffer out = x.value().reshaped(std::move(shape));
        return tape_of(x).record("reshape", std::move(out), {x}, [x](Tape& t, const NdBuffer& g) {
            if (NdBuffer* gx = t.grad_slot(x))
                for (std::size_t i = 0; i < g.size(); ++i)
                    (*gx)[i] += g[i];
        });
    }

    Var sum(Var x) {
        double acc = 0.0;
        for (double v : x.value().data())
            acc += v;
        return tape_of(x).record("sum", NdBuffer::scalar(acc), {x}, [x](Tape& t, const NdBuffer& g) {
            if (NdBuffer* gx = t.grad_slot(x))
                for (auto& v : gx->storage())
                    v += g[0];
        });
    }

    Var mean(Var x) { return scale(sum(x), 1.0 / static_cast<double>(x.value().size())); }

    Var dot(Var x, const NdBuffer& weights) {
        require_same_shape(x.value(), weights, "dot");
        double acc = 0.0;
        const NdBuffer& xv = x.value();
        for (std::size_t i = 0; i < xv.size(); ++i)
            acc += xv[i] * weights[i];
        return tape_of(x).record("dot", NdBuffer::scalar(acc), {x}, [x, weights](Tape& t, const NdBuffer& g) {
            if (NdBuffer* gx = t.grad_slot(x))
                for (std::size_t i = 0; i < weights.size(); ++i)
                    (*gx)[i] += g[0] * weights[i];
        });
    }

    Var sigmoid(Var x) {
        return unary("sigmoid", x, sigmoid_scalar, [](double, double y) { return y * (1.0 - y); });
    }

    Var silu(Var x) {
        return unary("silu", x, [](double v) { return v * sigmoid_scalar(v); },
                     [](double v, double) {
                         const double s = sigmoid_scalar(v);
                         return s * (1.0 + v * (1.0 - s));
                     });
    }

    Var exp(Var x) {
        return unary("exp", x, [](double v) { return std::exp(v); }, [](double, double y) { return y; });
    }

    Var log(Var x) {
        return unary("log", x, [](double v) { return std::log(v); }, [](double v, double) { return 1.0 / v; });
    }

    Var abs(Var x) {
        return unary("abs", x, [](double v) { return std::abs(v); },
                     [](double v, double) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); });
    }

    Var square(Var x) {
        return unary("square", x, [](double v) { return v * v; }, [](double v, double) { return 2.0 * v; });
    }

    double softplus_clamped(double x, double lo, double hi) {
        if (!(lo > 0.0 && lo < hi))
            throw ConfigError(fmt::format("softplus_clamped needs 0 < lo < hi, got lo={} hi={}", lo, hi));
        return std::clamp(softplus_scalar(x), lo, hi);
    }

    Var softplus_clamped(Var x, double lo, double hi) {
        if (!(lo > 0.0 && lo < hi))
            throw ConfigError(fmt::format("softplus_clamped needs 0 < lo < hi, got lo={} hi={}", lo, hi));
        return unary("softplus_clamped", x, [lo, hi](double v) { return std::clamp(softplus_scalar(v), lo, hi); },
                     [lo, hi](double v, double) {
                         const double raw = softplus_scalar(v);
                         return (raw < lo || raw > hi) ? 0.0 : sigmoid_scalar(v);
                     });
    }

    Var softmax_rows(Var x) {
        const NdBuffer& xv = x.value();
        const std::size_t n = xv.rows(), c = xv.cols();
        NdBuffer y(xv.shape());
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = xv.ptr() + i * c;
            const double m = *std::max_element(row, row + c);
            double z = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                y[i * c + j] = std::exp(row[j] - m);
                z += y[i * c + j];
            }
            for (std::size_t j = 0; j < c; ++j)
                y[i * c + j] /= z;
        }
        NdBuffer saved = y;
        return tape_of(x).record("softmax_rows", std::move(y), {x},
                                 [x, n, c, saved = std::move(saved)](Tape& t, const NdBuffer& g) {
                                     NdBuffer* gx = t.grad_slot(x);
                                     if (!gx)
                                         return;
                                     for (std::size_t i = 0; i < n; ++i) {
                                         double dotp = 0.0;
                                         for (std::size_t j = 0; j < c; ++j)
                                             dotp += g[i * c + j] * saved[i * c + j];
                                         for (std::size_t j = 0; j < c; ++j)
                                             (*gx)[i * c + j] += saved[i * c + j] * (g[i * c + j] - dotp);
                                     }
                                 });
    }

    Var log_softmax_rows(Var x) {
        const NdBuffer& xv = x.value();
        const std::size_t n = xv.rows(), c = xv.cols();
        NdBuffer y(xv.shape());
        for (std::size_t i = 0; i < n; ++i) {
            const double* row = xv.ptr() + i * c;
            const double m = *std::max_element(row, row + c);
            double z = 0.0;
            for (std::size_t j = 0; j < c; ++j)
                z += std::exp(row[j] - m);
            const double lse = m + std::log(z);
            for (std::size_t j = 0; j < c; ++j)
                y[i * c + j] = row[j] - lse;
        }
        NdBuffer saved = y;
        return tape_of(x).record("log_softmax_rows", std::move(y), {x},
                                 [x, n, c, saved = std::move(saved)](Tape& t, const NdBuffer& g) {
                                     NdBuffer* gx = t.grad_slot(x);
                                     if (!gx)
                                         return;
                                     for (std::size_t i = 0; i < n; ++i) {
                                         double gsum = 0.0;
                                         for (std::size_t j = 0; j < c; ++j)
                                             gsum += g[i * c + j];
                                         for (std::size_t j = 0; j < c; ++j)
                                             (*gx)[i * c + j] += g[i * c + j] - std::exp(saved[i * c + j]) * gsum;
                                     }
                                 });
    }

    Var gather_rows(Var x, std::vector<std::int32_t> idx) {
        const NdBuffer& xv = x.value();
        const std::size_t r = xv.rows(), c = xv.cols();
        if (idx.empty())
            throw DimensionError("gather_rows: empty index list");
        for (std::size_t i = 0; i < idx.size(); ++i)
            if (idx[i] < 0 || static_cast<std::size_t>(idx[i]) >= r)
                throw IndexError(fmt::format("gather_rows: entry {} = {} outside [0, {})", i, idx[i], r));
        NdBuffer out({idx.size(), c});
        parallel_for(idx.size(), [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i)
                std::copy_n(xv.ptr() + static_cast<std::size_t>(idx[i]) * c, c, out.ptr() + i * c);
        }, 4096);
        return tape_of(x).record("gather_rows", std::move(out), {x},
                                 [x, idx = std::move(idx)](Tape& t, const NdBuffer& g) {
                                     if (NdBuffer* gx = t.grad_slot(x))
                                         accumulate_rows_ordered(g, idx, *gx);
                                 });
    }

    Var scatter_add_rows(Var target, std::vector<std::int32_t> rows, Var values) {
        const NdBuffer& tv = target.value();
        const NdBuffer& vv = values.value();
        const std::size_t r = tv.rows(), c = tv.cols();
        if (vv.cols() != c || vv.rows() != rows.size())
            throw DimensionError(fmt::format("scatter_add: values {} do not match {} entries of width {}",
                                             shape_string(vv.shape()), rows.size(), c));
        for (std::size_t i = 0; i < rows.size(); ++i)
            if (rows[i] < 0 || static_cast<std::size_t>(rows[i]) >= r)
                throw IndexError(fmt::format("scatter_add: entry {} targets row {} outside [0, {})", i, rows[i], r));

        NdBuffer out = tv;
        const RowBuckets b = bucket_rows(rows, r);
        parallel_for(r, [&](std::size_t lo, std::size_t hi) {
            std::vector<double> scratch;
            for (std::size_t row = lo; row < hi; ++row) {
                const std::size_t begin = b.offsets[row], end = b.offsets[row + 1];
                if (begin == end)
                    continue;
                for (std::size_t j = 0; j < c; ++j) {
                    scratch.clear();
                    for (std::size_t k = begin; k < end; ++k)
                        scratch.push_back(vv[b.order[k] * c + j]);
                    std::sort(scratch.begin(), scratch.end());
                    double acc = 0.0;
                    for (double v : scratch)
                        acc += v;
                    out[row * c + j] += acc;
                }
            }
        });
        return tape_of(target).record("scatter_add", std::move(out), {target, values},
                                      [target, values, rows = std::move(rows), c](Tape& t, const NdBuffer& g) {
                                          if (NdBuffer* gt = t.grad_slot(target))
                                              for (std::size_t i = 0; i < g.size(); ++i)
                                                  (*gt)[i] += g[i];
                                          if (NdBuffer* gv = t.grad_slot(values))
                                              for (std::size_t i = 0; i < rows.size(); ++i)
                                                  for (std::size_t j = 0; j < c; ++j)
                                                      (*gv)[i * c + j] += g[static_cast<std::size_t>(rows[i]) * c + j];
                                      });
    }

    Var scatter_add(Var target, std::span<const Cell> cells, Var values) {
        const NdBuffer& tv = target.value();
        if (tv.rank() != 3)
            throw DimensionError(fmt::format("scatter_add: target must be H x W x C, got {}", shape_string(tv.shape())));
        const auto h = static_cast<std::int32_t>(tv.dim(0));
        const auto w = static_cast<std::int32_t>(tv.dim(1));
        std::vector<std::int32_t> rows(cells.size());
        for (std::size_t i = 0; i < cells.size(); ++i) {
            const auto [r, c] = cells[i];
            if (r < 0 || r >= h || c < 0 || c >= w)
                throw IndexError(fmt::format("scatter_add: entry {} at ({}, {}) outside {}x{}", i, r, c, h, w));
            rows[i] = r * w + c;
        }
        const Shape shape = tv.shape();
        Var flat = reshape(target, {tv.rows(), tv.cols()});
        return reshape(scatter_add_rows(flat, std::move(rows), values), shape);
    }

    namespace {
        struct BilinearTap {
            std::size_t x0, x1, y0, y1;
            double fx, fy;
            bool clamp_u, clamp_v;
        };

        BilinearTap bilinear_tap(double u, double v, std::size_t w, std::size_t h) {
            BilinearTap tap{};
            const double umax = static_cast<double>(w - 1);
            const double vmax = static_cast<double>(h - 1);
            tap.clamp_u = !(u > 0.0 && u < umax);
            tap.clamp_v = !(v > 0.0 && v < vmax);
            const double uc = std::clamp(u, 0.0, umax);
            const double vc = std::clamp(v, 0.0, vmax);
            tap.x0 = static_cast<std::size_t>(std::floor(uc));
            tap.y0 = static_cast<std::size_t>(std::floor(vc));
            tap.x1 = std::min(tap.x0 + 1, w - 1);
            tap.y1 = std::min(tap.y0 + 1, h - 1);
            tap.fx = uc - static_cast<double>(tap.x0);
            tap.fy = vc - static_cast<double>(tap.y0);
            return tap;
        }
    } // namespace

    Var sample_bilinear(Var plane, Var coords) {
        const NdBuffer& pv = plane.value();
        const NdBuffer& cv = coords.value();
        if (pv.rank() != 3)
            throw DimensionError(fmt::format("sample_bilinear: plane must be H x W x C, got {}", shape_string(pv.shape())));
        if (cv.cols() != 2)
            throw DimensionError(fmt::format("sample_bilinear: coords must be N x 2, got {}", shape_string(cv.shape())));
        const std::size_t h = pv.dim(0), w = pv.dim(1), c = pv.dim(2), n = cv.rows();
        NdBuffer out({n, c});
        parallel_for(n, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                const BilinearTap tap = bilinear_tap(cv[2 * i], cv[2 * i + 1], w, h);
                const double* f00 = pv.ptr() + (tap.y0 * w + tap.x0) * c;
                const double* f01 = pv.ptr() + (tap.y0 * w + tap.x1) * c;
                const double* f10 = pv.ptr() + (tap.y1 * w + tap.x0) * c;
                const double* f11 = pv.ptr() + (tap.y1 * w + tap.x1) * c;
                const double w00 = (1 - tap.fx) * (1 - tap.fy), w01 = tap.fx * (1 - tap.fy);
                const double w10 = (1 - tap.fx) * tap.fy, w11 = tap.fx * tap.fy;
                for (std::size_t j = 0; j < c; ++j)
                    out[i * c + j] = w00 * f00[j] + w01 * f01[j] + w10 * f10[j] + w11 * f11[j];
            }
        }, 1024);
        return tape_of(plane).record(
            "sample_bilinear", std::move(out), {plane, coords}, [plane, coords, h, w, c, n](Tape& t, const NdBuffer& g) {
                NdBuffer* gp = t.grad_slot(plane);
                NdBuffer* gc = t.grad_slot(coords);
                const NdBuffer& pv = t.value(plane);
                const NdBuffer& cv = t.value(coords);
                for (std::size_t i = 0; i < n; ++i) {
                    const BilinearTap tap = bilinear_tap(cv[2 * i], cv[2 * i + 1], w, h);
                    const std::size_t i00 = (tap.y0 * w + tap.x0) * c, i01 = (tap.y0 * w + tap.x1) * c;
                    const std::size_t i10 = (tap.y1 * w + tap.x0) * c, i11 = (tap.y1 * w + tap.x1) * c;
                    const double* gi = g.ptr() + i * c;
                    if (gp) {
                        const double w00 = (1 - tap.fx) * (1 - tap.fy), w01 = tap.fx * (1 - tap.fy);
                        const double w10 = (1 - tap.fx) * tap.fy, w11 = tap.fx * tap.fy;
                        for (std::size_t j = 0; j < c; ++j) {
                            (*gp)[i00 + j] += w00 * gi[j];
                            (*gp)[i01 + j] += w01 * gi[j];
                            (*gp)[i10 + j] += w10 * gi[j];
                            (*gp)[i11 + j] += w11 * gi[j];
                        }
                    }
                    if (gc) {
                        double du = 0.0, dv = 0.0;
                        for (std::size_t j = 0; j < c; ++j) {
                            const double f00 = pv[i00 + j], f01 = pv[i01 + j], f10 = pv[i10 + j], f11 = pv[i11 + j];
                            du += gi[j] * ((f01 - f00) * (1 - tap.fy) + (f11 - f10) * tap.fy);
                            dv += gi[j] * ((f10 - f00) * (1 - tap.fx) + (f11 - f01) * tap.fx);
                        }
                        if (!tap.clamp_u)
                            (*gc)[2 * i] += du;
                        if (!tap.clamp_v)
                            (*gc)[2 * i + 1] += dv;
                    }
                }
            });
    }

    Var group_weighted_sum(Var values, Var weights) {
        const NdBuffer& vv = values.value();
        const NdBuffer& wv = weights.value();
        const std::size_t n = wv.rows(), k = wv.cols(), c = vv.cols();
        if (vv.rows() != n * k)
            throw DimensionError(fmt::format("group_weighted_sum: values {} vs weights {}",
                                             shape_string(vv.shape()), shape_string(wv.shape())));
        NdBuffer out({n, c});
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t s = 0; s < k; ++s) {
                const double ws = wv[i * k + s];
                const double* row = vv.ptr() + (i * k + s) * c;
                for (std::size_t j = 0; j < c; ++j)
                    out[i * c + j] += ws * row[j];
            }
        return tape_of(values).record("group_weighted_sum", std::move(out), {values, weights},
                                      [values, weights, n, k, c](Tape& t, const NdBuffer& g) {
                                          NdBuffer* gv = t.grad_slot(values);
                                          NdBuffer* gw = t.grad_slot(weights);
                                          const NdBuffer& vv = t.value(values);
                                          const NdBuffer& wv = t.value(weights);
                                          for (std::size_t i = 0; i < n; ++i)
                                              for (std::size_t s = 0; s < k; ++s) {
                                                  const std::size_t row = (i * k + s) * c;
                                                  double acc = 0.0;
                                                  for (std::size_t j = 0; j < c; ++j) {
                                                      if (gv)
                                                          (*gv)[row + j] += wv[i * k + s] * g[i * c + j];
                                                      acc += vv[row + j] * g[i * c + j];
                                                  }
                                                  if (gw)
                                                      (*gw)[i * k + s] += acc;
                                              }
                                      });
    }

    Var weighted_sum(const std::vector<NdBuffer>& levels, Var weights) {
        const NdBuffer& wv = weights.value();
        if (levels.empty() || wv.size() != levels.size())
            throw DimensionError(fmt::format("weighted_sum: {} levels but {} weights", levels.size(), wv.size()));
        for (const auto& l : levels)
            require_same_shape(levels.front(), l, "weighted_sum");
        NdBuffer out(levels.front().shape(), 0.0);
        for (std::size_t l = 0; l < levels.size(); ++l)
            for (std::size_t i = 0; i < out.size(); ++i)
                out[i] += wv[l] * levels[l][i];
        return tape_of(weights).record("weighted_sum", std::move(out), {weights},
                                       [weights, levels](Tape& t, const NdBuffer& g) {
                                           if (NdBuffer* gw = t.grad_slot(weights))
                                               for (std::size_t l = 0; l < levels.size(); ++l) {
                                                   double acc = 0.0;
                                                   for (std::size_t i = 0; i < g.size(); ++i)
                                                       acc += g[i] * levels[l][i];
                                                   (*gw)[l] += acc;
                                               }
                                       });
    }

} // namespace gssc::ops
