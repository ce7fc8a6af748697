// Wire types shared with the session bridge (/ws JSON schema).

export type OperatorPhase =
  | "Idle"
  | "Takeover"
  | "TrajectoryCreation"
  | "AwaitCheck"
  | "TrajectoryApproval"
  | "Monitoring"
  | "EmergencyStopped"
  | "Handover";

export type VehiclePhase =
  | "AutomatedOperation"
  | "AwaitTrajectory"
  | "TrajectoryCheck"
  | "AwaitApproval"
  | "TrajectoryTracking"
  | "EmergencyStop"
  | "Handover";

export type UiCommandType =
  | "add_waypoint"
  | "undo_waypoint"
  | "clear"
  | "submit_proposal"
  | "approve"
  | "reject"
  | "estop"
  | "end_session";

export interface UiCommand {
  type: UiCommandType;
  x?: number;
  y?: number;
}

export interface VehicleTelemetry {
  x: number;
  y: number;
  psi: number;
  v: number;
  a: number;
  s_progress: number;
}

export interface ScenarioGeometry {
  name: string;
  bounds: number[][];
  obstacles: number[][][];
  start_pose: number[];
  goal: { x: number; y: number; radius: number };
}

export interface TrajectoryOverlay {
  id: string;
  points: number[][];
  v: number[];
  length_m: number;
}

export interface PreviewOverlay {
  points?: number[][];
  length_m?: number;
  duration_s?: number;
  error?: string;
}

export interface ScenePayload {
  scenario: ScenarioGeometry;
  phase: OperatorPhase;
  vehicle_phase: VehiclePhase;
  vehicle: VehicleTelemetry;
  draft_waypoints: number[][];
  preview: PreviewOverlay | null;
  active_trajectory: TrajectoryOverlay | null;
  check: { status: string; reasons: string[]; traj_id: string | null } | null;
  alarms: string[];
  goal_reached: boolean;
  mrm_active: boolean;
  sim_time_ms: number;
}

export interface SceneFrame {
  type: "scene_state";
  seq: number;
  sent_at_ms: number;
  payload: ScenePayload;
}

export interface ErrorFrame {
  type: "error";
  reason: string;
  detail?: string;
}

export type ServerFrame = SceneFrame | ErrorFrame;
