import type { OperatorPhase, UiCommandType } from "./types";

/**
 * Phase gate for operator commands. Blocked commands are disabled in the
 * toolbar and never sent; the bridge enforces the same rule server-side.
 */
export function commandAllowed(
  phase: OperatorPhase,
  cmd: UiCommandType,
  goalReached: boolean,
): boolean {
  switch (cmd) {
    case "add_waypoint":
    case "undo_waypoint":
    case "clear":
    case "submit_proposal":
      return phase === "TrajectoryCreation";
    case "approve":
    case "reject":
      return phase === "TrajectoryApproval";
    case "estop":
      return phase === "Monitoring";
    case "end_session":
      return phase === "TrajectoryCreation" && goalReached;
    default:
      return false;
  }
}

export const ALL_COMMANDS: UiCommandType[] = [
  "add_waypoint",
  "undo_waypoint",
  "clear",
  "submit_proposal",
  "approve",
  "reject",
  "estop",
  "end_session",
];
