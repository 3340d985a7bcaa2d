#ifndef NCANM_BENCH_HPP
#define NCANM_BENCH_HPP

#include <ncanm/bench/config.hpp>
#include <ncanm/bench/experiment.hpp>
#include <ncanm/bench/metrics.hpp>
#include <ncanm/bench/results_io.hpp>

#endif // NCANM_BENCH_HPP
