#pragma once

#include <cstddef>
#include <exception>
#include <functional>
#include <span>

#include "histel/kbstore.hpp"

// Data-parallel inner loops. Each OpenMP kernel has a serial reference with
// the same signature; tests hold the two to identical results.
namespace histel::kernels {

// out[r] = <row r, query> for every row of the index.
void DenseScoresSerial(const EmbeddingIndex& index, std::span<const float> query,
                       std::span<double> out);
void DenseScoresParallel(const EmbeddingIndex& index, std::span<const float> query,
                         std::span<double> out);

// Runs body(i) for i in [0, n). jobs <= 1 runs serially in index order.
// The exception of the lowest failing index is rethrown after the loop.
void ParallelFor(std::size_t n, int jobs, const std::function<void(std::size_t)>& body);

int MaxThreads();

}  // namespace histel::kernels
