// Wire contract of the discrete-ir HTTP service. Field names and shapes
// mirror the JSON bodies exactly; the UI renders these documents verbatim.

export interface ConstraintDoc {
  column: string;
  op: string;
  operand: unknown;
  turn_index: number;
}

export interface DialogStateDoc {
  active_table: string;
  constraints: Record<string, ConstraintDoc>;
}

export interface IssueDoc {
  kind: string;
  location: string;
  detail: string;
  suggestion: string | null;
}

export interface RepairDoc {
  location: string;
  before: string;
  after: string;
}

export type QueryStatus = "valid" | "repaired" | "rejected";

export interface ReportDoc {
  status: QueryStatus;
  issues: IssueDoc[];
  repairs: RepairDoc[];
}

export interface QueryDoc {
  question: string;
  raw_sql: string;
  report: ReportDoc;
  prompt_tokens: number;
}

export interface ObservationDoc {
  columns: string[];
  row_count: number;
  sample_rows: unknown[][];
}

export interface ActionDoc {
  tool: "query_table" | "respond";
  arguments: Record<string, unknown>;
}

export interface TurnDoc {
  turn_index: number;
  utterance: string;
  thought: string;
  action: ActionDoc;
  observation: ObservationDoc | null;
  response: string;
  state_after: DialogStateDoc;
  query: QueryDoc | null;
  routed_table: string | null;
}

export interface SessionDoc {
  session_id: string;
  dialog_state: DialogStateDoc;
  routing_history: string[];
  turns: TurnDoc[];
}

export interface TableInfo {
  table_id: string;
  domain_id: string;
  rows: number;
  columns: number;
}

export interface ServiceErrorBody {
  error: { kind: string; detail: string };
}
