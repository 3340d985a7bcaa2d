#ifndef NCANM_NCANM_HPP
#define NCANM_NCANM_HPP

#include <ncanm/baselines.hpp>
#include <ncanm/convergence.hpp>
#include <ncanm/crlb.hpp>
#include <ncanm/objective.hpp>
#include <ncanm/random.hpp>
#include <ncanm/signal_model.hpp>
#include <ncanm/solver.hpp>
#include <ncanm/types.hpp>

#endif // NCANM_NCANM_HPP
