// Convenience umbrella: the whole library.
#pragma once

#include "etwin/adjoint.hpp"
#include "etwin/config.hpp"
#include "etwin/core.hpp"
#include "etwin/csv.hpp"
#include "etwin/ecg.hpp"
#include "etwin/eikonal.hpp"
#include "etwin/feasible.hpp"
#include "etwin/fem.hpp"
#include "etwin/leads.hpp"
#include "etwin/mesh.hpp"
#include "etwin/mesh_io.hpp"
#include "etwin/metrics.hpp"
#include "etwin/optimizer.hpp"
#include "etwin/rng.hpp"
#include "etwin/run_io.hpp"
#include "etwin/svg.hpp"
#include "etwin/synthetic.hpp"
