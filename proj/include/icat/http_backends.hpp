#pragma once

// Backends that speak JSON over HTTP.
//
//   chat       POST {endpoint}/chat/completions   OpenAI-compatible
//   embedding  POST {endpoint}/embeddings         OpenAI-compatible
//   nli        POST {endpoint}  {"premise", "hypothesis"} -> {"labels": [...], "probs": [...]}
//   websearch  POST {endpoint}  {"query", "k"} -> {"results": [{"snippet", "url"}]}
//
// 429, 5xx and connection failures raise transient BackendErrors; any other
// non-2xx status is terminal.

#include <memory>

#include "icat/gateway.hpp"

namespace icat {

std::shared_ptr<ChatBackend> make_openai_chat_backend(const BackendConfig& config);
std::shared_ptr<EmbeddingBackend> make_openai_embedding_backend(const BackendConfig& config);
std::shared_ptr<NliBackend> make_http_nli_backend(const BackendConfig& config);
std::shared_ptr<WebSearchBackend> make_http_websearch_backend(const BackendConfig& config);

}  // namespace icat
