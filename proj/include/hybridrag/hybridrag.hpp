#pragma once

#include "hybridrag/backend.hpp"
#include "hybridrag/client_engine.hpp"
#include "hybridrag/cloud_service.hpp"
#include "hybridrag/config.hpp"
#include "hybridrag/coordinator.hpp"
#include "hybridrag/core/errors.hpp"
#include "hybridrag/core/levenshtein.hpp"
#include "hybridrag/core/log.hpp"
#include "hybridrag/core/sentences.hpp"
#include "hybridrag/core/tokenizer.hpp"
#include "hybridrag/core/types.hpp"
#include "hybridrag/engine_server.hpp"
#include "hybridrag/harness/dataprep.hpp"
#include "hybridrag/harness/metrics.hpp"
#include "hybridrag/harness/sim.hpp"
#include "hybridrag/harness/sweep.hpp"
#include "hybridrag/http_backend.hpp"
#include "hybridrag/memgen.hpp"
#include "hybridrag/retriever.hpp"
#include "hybridrag/wire.hpp"
