#pragma once

#include <memory>

#include "icat/gateway.hpp"
#include "icat/index_store.hpp"
#include "icat/mock_backends.hpp"

namespace helpers {

inline icat::BackendConfig config(icat::BackendRole role) {
    icat::BackendConfig c;
    c.role = role;
    c.initial_backoff = std::chrono::milliseconds{1};
    return c;
}

struct MockChat {
    std::shared_ptr<icat::FixtureChatBackend> backend = std::make_shared<icat::FixtureChatBackend>();
    icat::ChatClient client{config(icat::BackendRole::chat), backend, std::make_shared<icat::ResponseCache>()};
};

struct MockNli {
    std::shared_ptr<icat::SubstringNliBackend> backend = std::make_shared<icat::SubstringNliBackend>();
    icat::NliClient client{config(icat::BackendRole::nli), backend, std::make_shared<icat::ResponseCache>()};
};

struct MockEmbedder {
    std::shared_ptr<icat::HashEmbeddingBackend> backend = std::make_shared<icat::HashEmbeddingBackend>(64);
    icat::EmbeddingClient client{config(icat::BackendRole::embedding), backend,
                                 std::make_shared<icat::ResponseCache>()};
};

inline icat::Gateway mock_gateway() {
    icat::Gateway g;
    g.cache = std::make_shared<icat::ResponseCache>();
    g.chat = std::make_shared<icat::ChatClient>(config(icat::BackendRole::chat),
                                                std::make_shared<icat::FixtureChatBackend>(), g.cache);
    g.embedding = std::make_shared<icat::EmbeddingClient>(config(icat::BackendRole::embedding),
                                                          std::make_shared<icat::HashEmbeddingBackend>(64), g.cache);
    g.nli = std::make_shared<icat::NliClient>(config(icat::BackendRole::nli),
                                              std::make_shared<icat::SubstringNliBackend>(), g.cache);
    return g;
}

inline icat::IndexBundle small_index(const std::vector<icat::Document>& docs, icat::EmbeddingClient& embedder) {
    auto bundle = icat::ingest_documents(docs);
    icat::build_dense(bundle, embedder);
    return bundle;
}

}  // namespace helpers
