//! Gene vocabulary, stage planning and stage-restricted views.

mod build;
mod corpus;
mod crucial;
mod plan;
mod sample;
mod view;
mod vocab;

pub use build::{build_plan, PlanConfig};
pub use corpus::{build_stage_view, build_training_views, Corpus, StageView};
pub use crucial::{dedup_crucial_sets, select_crucial_genes};
pub use plan::{partition_dataset, partition_genes, GeneMembership, GenePartitionSpec, GeneRole, Stage, StagePlan};
pub use sample::ExpressionSample;
pub use view::{build_downstream_view, stage_view};
pub use vocab::GeneVocabulary;
