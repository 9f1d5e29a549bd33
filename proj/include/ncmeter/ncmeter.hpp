#pragma once

#include "ncmeter/accumulate.hpp"
#include "ncmeter/agreement.hpp"
#include "ncmeter/duality.hpp"
#include "ncmeter/error.hpp"
#include "ncmeter/ingest.hpp"
#include "ncmeter/metrics.hpp"
#include "ncmeter/pairwise.hpp"
#include "ncmeter/report.hpp"
#include "ncmeter/run_table.hpp"
#include "ncmeter/stats.hpp"
#include "ncmeter/summary.hpp"
#include "ncmeter/synth.hpp"
#include "ncmeter/types.hpp"
