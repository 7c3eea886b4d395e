//! Natural-language front end: a deterministic lexicon parser producing
//! semantic frames, and template generation for both speakers.

pub mod lexicon;
pub mod nlg;
pub mod nlu;

use rand::Rng;

pub use lexicon::{Lexicon, LexiconFile};
pub use nlg::{TemplateSet, MIN_TEMPLATES};

use crate::dialogue::{AgentAction, SemanticFrame};
use crate::error::Result;
use crate::ontology::Ontology;

#[derive(Debug, Clone)]
pub struct LanguageLayer {
    ontology: Ontology,
    lexicon: Lexicon,
    templates: TemplateSet,
}

impl LanguageLayer {
    pub fn new(ontology: &Ontology, lexicon: &LexiconFile, templates: TemplateSet) -> Result<Self> {
        Ok(LanguageLayer {
            ontology: ontology.clone(),
            lexicon: Lexicon::compile(lexicon, ontology)?,
            templates,
        })
    }

    /// Bundled English lexicon and templates, with identifier fallbacks for
    /// entries the demo lexicon lacks.
    pub fn demo(ontology: &Ontology) -> Result<Self> {
        Self::new(
            ontology,
            &LexiconFile::demo_for(ontology),
            TemplateSet::demo(),
        )
    }

    pub fn ontology(&self) -> &Ontology {
        &self.ontology
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn templates(&self) -> &TemplateSet {
        &self.templates
    }

    pub fn parse_user(&self, text: &str, context: Option<usize>) -> Result<SemanticFrame> {
        nlu::parse_user(text, &self.lexicon, &self.ontology, context)
    }

    pub fn parse_agent(&self, text: &str) -> Result<AgentAction> {
        nlu::parse_agent(text, &self.lexicon, &self.ontology)
    }

    pub fn realize<R: Rng + ?Sized>(&self, frame: &SemanticFrame, rng: &mut R) -> Result<String> {
        nlg::realize(frame, &self.templates, &self.lexicon, &self.ontology, rng)
    }

    pub fn realize_with(&self, frame: &SemanticFrame, template: usize) -> Result<String> {
        nlg::realize_with(
            frame,
            template,
            &self.templates,
            &self.lexicon,
            &self.ontology,
        )
    }

    pub fn realize_action<R: Rng + ?Sized>(
        &self,
        action: AgentAction,
        rng: &mut R,
    ) -> Result<String> {
        self.realize(&SemanticFrame::from_action(action, &self.ontology), rng)
    }
}
