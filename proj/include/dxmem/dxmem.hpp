#pragma once

// Umbrella header. Individual headers are all self-contained; include the
// ones you need, or this one for everything except the HTTP adapters
// (pull in dxmem/http_adapters.hpp and dxmem/config.hpp explicitly when
// talking to remote endpoints).

#include "dxmem/case_record.hpp"
#include "dxmem/construction.hpp"
#include "dxmem/embedding.hpp"
#include "dxmem/errors.hpp"
#include "dxmem/evaluation.hpp"
#include "dxmem/gateway.hpp"
#include "dxmem/labels.hpp"
#include "dxmem/memory_store.hpp"
#include "dxmem/mock_agent.hpp"
#include "dxmem/note.hpp"
#include "dxmem/prompts.hpp"
#include "dxmem/retrieval.hpp"
#include "dxmem/taxonomy.hpp"
