// Payload shapes of the annotation service HTTP API (see docs/api.md).

export type DesignTuple = [number, number, number, number];

export interface SessionInfo {
  horizon: number;
  dims: number;
  rounds_completed: number;
  uncertainty: number | null;
  annotations: number;
  sampling: boolean;
}

export interface Band {
  object: number;
  times: number[];
  mean: number[];
  sd: number[];
}

export interface Polyline {
  object: number;
  times: number[];
  values: number[];
}

export interface AnsweredEntry {
  design: DesignTuple;
  answer: number;
  same_probability: number;
}

export interface PosteriorPayload {
  bands: Band[];
  polylines: Polyline[];
  answered: AnsweredEntry[];
  uncertainty_trace: number[];
}

export interface QueryObservation {
  t: number;
  n: number;
  coords: number[];
}

export interface QueryPayload {
  design: DesignTuple;
  mi: number | null;
  round: number;
  observations: [QueryObservation, QueryObservation];
  context: QueryObservation[][];
}

export interface JobStatus {
  status: "queued" | "running" | "done" | "failed";
  progress?: number;
  error?: string;
}

export type Answer = "same" | "different";
