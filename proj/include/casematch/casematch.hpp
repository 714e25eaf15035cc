#pragma once

// Everything except the HTTP front end, which pulls in cpp-httplib.

#include "casematch/baseline.hpp"
#include "casematch/clustering.hpp"
#include "casematch/core.hpp"
#include "casematch/date_embedding.hpp"
#include "casematch/date_extraction.hpp"
#include "casematch/engine.hpp"
#include "casematch/evaluation.hpp"
#include "casematch/external_link.hpp"
#include "casematch/frequency.hpp"
#include "casematch/hitmiss.hpp"
#include "casematch/metrics.hpp"
#include "casematch/pair_features.hpp"
#include "casematch/pair_stream.hpp"
#include "casematch/report.hpp"
#include "casematch/review.hpp"
#include "casematch/svm.hpp"
#include "casematch/synth.hpp"
#include "casematch/training.hpp"
