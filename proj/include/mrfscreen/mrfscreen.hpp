#pragma once

#include "mrfscreen/basis.hpp"
#include "mrfscreen/csv.hpp"
#include "mrfscreen/diagnostics.hpp"
#include "mrfscreen/grise.hpp"
#include "mrfscreen/model.hpp"
#include "mrfscreen/model_io.hpp"
#include "mrfscreen/node_recovery.hpp"
#include "mrfscreen/quadrature.hpp"
#include "mrfscreen/report.hpp"
#include "mrfscreen/rng.hpp"
#include "mrfscreen/sampler.hpp"
#include "mrfscreen/structure.hpp"
#include "mrfscreen/threads.hpp"
