#pragma once

#include <cflab/baselines.hpp>
#include <cflab/correlation.hpp>
#include <cflab/error.hpp>
#include <cflab/harness.hpp>
#include <cflab/ingest.hpp>
#include <cflab/metrics.hpp>
#include <cflab/models.hpp>
#include <cflab/ratings.hpp>
#include <cflab/similarity.hpp>
#include <cflab/spectral.hpp>
#include <cflab/synthetic.hpp>
