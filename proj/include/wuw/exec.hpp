#pragma once

namespace wuw {

// Selects between the OpenMP kernels and their serial reference twins.
// Both produce bit-identical results: the parallel versions only split work
// over independent outputs and never reorder a floating-point reduction.
enum class Exec { serial, parallel };

}  // namespace wuw
