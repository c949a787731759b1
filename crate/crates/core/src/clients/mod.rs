//! Model clients: chat completion providers and text embedders.

pub mod chat;
pub mod embed;
pub mod retry;

pub use chat::{
    ChatClient, ChatProvider, ClientError, CompletionRequest, CompletionResult, FnProvider, MockDirProvider,
    ProviderError, RemoteChatProvider, ResponseCache,
};
pub use embed::{cosine_similarity, EmbedError, Embedder, RemoteEmbedder, StubEmbedder};
pub use retry::RetryPolicy;
