//! Cloud to described instance graph: over-segmentation, refinement and
//! segment descriptions.

use thiserror::Error;

use crate::descriptor::{DescriptorError, FpfhParams, PointDescriptions};
use crate::geometry::OrientedCloud;
use crate::segmentation::{build_instance_graph, oversegment, refine, InstanceGraph, OversegmentParams};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("cloud has no points")]
    EmptyCloud,
    #[error("no segment could be described")]
    NoSegments,
    #[error(transparent)]
    Descriptor(#[from] DescriptorError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub oversegment: OversegmentParams,
    pub adjacency_radius: f64,
    pub border_radius: f64,
    pub theta: f64,
    pub fpfh: FpfhParams,
}

/// Segments `cloud`, refines the segment graph and attaches a description
/// and point weight to every segment. Segments without any describable
/// point are dropped.
pub fn prepare_instance(cloud: &OrientedCloud, params: &PipelineParams) -> Result<InstanceGraph, PipelineError> {
    if cloud.is_empty() {
        return Err(PipelineError::EmptyCloud);
    }
    let segments = oversegment(cloud, params.oversegment);
    let graph = build_instance_graph(segments, cloud, params.adjacency_radius);
    let mut graph = refine(graph, cloud, params.theta, params.border_radius).graph;
    let points = PointDescriptions::compute(cloud, params.fpfh)?;
    let mut i = 0;
    while i < graph.len() {
        match points.describe(&graph.vertex(i).segment.indices) {
            Ok((description, used)) => {
                let v = graph.vertex_mut(i);
                v.description = Some(description);
                v.weight = used;
                i += 1;
            }
            Err(DescriptorError::EmptySegment) => graph.remove_vertex(i),
            Err(e) => return Err(e.into()),
        }
    }
    if graph.is_empty() {
        return Err(PipelineError::NoSegments);
    }
    Ok(graph)
}
