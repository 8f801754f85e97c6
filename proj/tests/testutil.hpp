// Shared test helpers: seeded random matrices, dense kernel oracles written
// independently of the compiler path, and a coordinate-space reference
// evaluator for stage-I programs.
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "strata/interp.hpp"
#include "strata/ir.hpp"
#include "strata/storage.hpp"

namespace strata::testing {

/*! \brief Random sparse matrix with integer-valued entries in [-4, 4] \ {0}. */
CooMatrix random_coo(std::mt19937& rng, int64_t rows, int64_t cols, double density,
                     DType dtype = DType::F64);

/*! \brief Dense row-major random matrix with small integer-ish values. */
DenseMatrix random_dense(std::mt19937& rng, int64_t rows, int64_t cols, bool fractions = false);

TensorData dense_to_data(const DenseMatrix& m, DType dtype);

// Dense oracles, deliberately written directly against the formulas.
DenseMatrix oracle_spmm(const DenseMatrix& a, const DenseMatrix& x);
DenseMatrix oracle_sddmm(const DenseMatrix& a, const DenseMatrix& x, const DenseMatrix& y);

bool matrices_close(const DenseMatrix& a, const DenseMatrix& b, double rel_tol,
                    std::string* why = nullptr);

/*!
 * \brief Direct evaluator for stage-I programs: enumerates coordinate tuples
 * by walking the aux arrays and evaluates the body on dense shadows of every
 * buffer. Shares no code with the lowering pipeline.
 */
struct ReferenceResult {
  std::map<std::string, std::vector<double>> dense;  // buffer -> dense shadow
  std::map<std::string, std::vector<int64_t>> shape; // logical dims
};
ReferenceResult reference_eval_stage1(const Program& p, const Bindings& b);

/*!
 * \brief Emit C for a stage-III program, compile it with the system compiler,
 * run it on the bindings, and return the output buffers (bit patterns read
 * back exactly).
 */
struct CRunResult {
  bool ok = false;
  std::string log;
  std::map<std::string, TensorData> outputs;
};
CRunResult emit_compile_run(const Program& p3, const Bindings& b);

}  // namespace strata::testing
