// Shapes of the pipeline service's JSON API (all responses carry v: 1).

export type Severity = "unlabeled" | "benign" | "suspicious" | "malicious";

export interface ConceptSummary {
  id: string;
  first_seen: number;
  last_seen: number;
  occurrences: number;
  category: string;
  severity: Severity;
  note: string;
  exemplars: number[][];
}

export interface PortContext {
  port: number;
  neighbors: [number, number][];
}

export interface ConceptDetail extends ConceptSummary {
  history: Array<Record<string, string>>;
  port_context: PortContext[];
}

export interface TimelineResponse {
  v: number;
  windows: number[];
  // per-concept sizes aligned with `windows`; null where the concept was absent
  series: Record<string, Array<number | null>>;
  noise: Array<number | null>;
}

export interface ConceptsResponse {
  v: number;
  concepts: ConceptSummary[];
}

export interface ConceptResponse {
  v: number;
  concept: ConceptDetail;
}

export interface AlertItem {
  window: number;
  kind: "NovelCluster" | "MaliciousRecurrence" | "SizeSpike";
  concept: string;
  size: number;
  category: string;
  exemplars: number[][];
  ts: string;
  countries?: Record<string, number>;
}

export interface AlertsResponse {
  v: number;
  alerts: AlertItem[];
}

export interface LabelResponse {
  v: number;
  status: "applied" | "queued";
  concept: string;
  severity: Severity;
}
