#ifndef KRONSKETCH_KRONSKETCH_HPP
#define KRONSKETCH_KRONSKETCH_HPP

#include "kronsketch/common.hpp"
#include "kronsketch/ensemble.hpp"
#include "kronsketch/harness.hpp"
#include "kronsketch/io.hpp"
#include "kronsketch/operator.hpp"
#include "kronsketch/pipelines.hpp"
#include "kronsketch/serialize.hpp"
#include "kronsketch/simplex.hpp"
#include "kronsketch/solver.hpp"
#include "kronsketch/verify.hpp"

#endif  // KRONSKETCH_KRONSKETCH_HPP
