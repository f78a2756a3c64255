use serde::{Deserialize, Serialize};

use crate::error::Result;

use super::PromptKind;

/// One call to a text-generation endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationRequest {
    pub task: PromptKind,
    /// The fully rendered prompt sent as the user message.
    pub prompt: String,
    /// The segment text that was substituted into the prompt.
    pub text: String,
    /// Output bound for this request, in characters.
    pub max_output_chars: usize,
}

/// A text-generation backend. Implementations are shared across worker
/// threads and must not add randomness of their own.
pub trait GenerationClient: Send + Sync {
    fn generate(&self, request: &GenerationRequest) -> Result<String>;

    fn name(&self) -> &str {
        "generation"
    }
}

impl<C: GenerationClient + ?Sized> GenerationClient for &C {
    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        (**self).generate(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

impl<C: GenerationClient + ?Sized> GenerationClient for Box<C> {
    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        (**self).generate(request)
    }

    fn name(&self) -> &str {
        (**self).name()
    }
}

/// Offline client that answers every request with its input text wrapped in
/// a REWRITTEN block.
#[derive(Debug, Clone, Copy, Default)]
pub struct EchoClient;

impl GenerationClient for EchoClient {
    fn generate(&self, request: &GenerationRequest) -> Result<String> {
        Ok(format!("<REWRITTEN>{}</REWRITTEN>", request.text))
    }

    fn name(&self) -> &str {
        "mock:echo"
    }
}
