#pragma once

#include "specaus/error.hpp"
#include "specaus/log.hpp"
#include "specaus/freq.hpp"
#include "specaus/graph.hpp"
#include "specaus/svar.hpp"
#include "specaus/estimate.hpp"
#include "specaus/freqdom.hpp"
#include "specaus/asymptotics.hpp"
#include "specaus/chi2.hpp"
#include "specaus/inference.hpp"
#include "specaus/io.hpp"
#include "specaus/config.hpp"
#include "specaus/pipeline.hpp"
