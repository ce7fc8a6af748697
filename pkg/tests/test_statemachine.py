"""Exhaustive conformance of the operator/vehicle state machines."""

import itertools

import pytest

from tgsim.protocol import (
    IllegalTransition,
    MessageType,
    OP_ALWAYS_OK,
    OPERATOR_TRANSITIONS,
    OpEvent,
    OperatorPhase as OP,
    VEH_ALWAYS_OK,
    VEHICLE_TRANSITIONS,
    VehEvent,
    VehiclePhase as VP,
    state_step_operator,
    state_step_vehicle,
)

# Expected transition tables, written out independently from the session
# requirements: check-fail returns to creation, check-pass advances to
# approval, reject returns to creation, approve starts monitoring/tracking,
# path end hands back to creation/await, emergencies reach the stop states,
# and session end hands the vehicle back to autonomous operation.
EXPECTED_OPERATOR = {
    (OP.IDLE, OpEvent.MSG_TELEOP_REQUEST): OP.TAKEOVER,
    (OP.TAKEOVER, OpEvent.UI_BEGIN_PLANNING): OP.TRAJECTORY_CREATION,
    (OP.TRAJECTORY_CREATION, OpEvent.UI_SUBMIT): OP.AWAIT_CHECK,
    (OP.TRAJECTORY_CREATION, OpEvent.UI_END_SESSION): OP.HANDOVER,
    (OP.TRAJECTORY_CREATION, OpEvent.MSG_MRM_EXECUTED): OP.EMERGENCY_STOPPED,
    (OP.AWAIT_CHECK, OpEvent.MSG_CHECK_OK): OP.TRAJECTORY_APPROVAL,
    (OP.AWAIT_CHECK, OpEvent.MSG_CHECK_FAIL): OP.TRAJECTORY_CREATION,
    (OP.AWAIT_CHECK, OpEvent.MSG_MRM_EXECUTED): OP.EMERGENCY_STOPPED,
    (OP.TRAJECTORY_APPROVAL, OpEvent.UI_APPROVE): OP.MONITORING,
    (OP.TRAJECTORY_APPROVAL, OpEvent.UI_REJECT): OP.TRAJECTORY_CREATION,
    (OP.TRAJECTORY_APPROVAL, OpEvent.MSG_MRM_EXECUTED): OP.EMERGENCY_STOPPED,
    (OP.MONITORING, OpEvent.MSG_TRACKING_STARTED): OP.MONITORING,
    (OP.MONITORING, OpEvent.MSG_PATH_END): OP.TRAJECTORY_CREATION,
    (OP.MONITORING, OpEvent.UI_ESTOP): OP.EMERGENCY_STOPPED,
    (OP.MONITORING, OpEvent.MSG_MRM_EXECUTED): OP.EMERGENCY_STOPPED,
    (OP.EMERGENCY_STOPPED, OpEvent.MSG_MRM_EXECUTED): OP.EMERGENCY_STOPPED,
    (OP.EMERGENCY_STOPPED, OpEvent.UI_ACK_MRM): OP.TRAJECTORY_CREATION,
}

EXPECTED_VEHICLE = {
    (VP.AUTOMATED_OPERATION, VehEvent.DISENGAGE): VP.AUTOMATED_OPERATION,
    (VP.AUTOMATED_OPERATION, VehEvent.MSG_TAKEOVER_ACK): VP.AWAIT_TRAJECTORY,
    (VP.AWAIT_TRAJECTORY, VehEvent.MSG_PROPOSAL): VP.TRAJECTORY_CHECK,
    (VP.AWAIT_TRAJECTORY, VehEvent.MSG_SESSION_END): VP.HANDOVER,
    (VP.TRAJECTORY_CHECK, VehEvent.CHECK_PASSED): VP.AWAIT_APPROVAL,
    (VP.TRAJECTORY_CHECK, VehEvent.CHECK_FAILED): VP.AWAIT_TRAJECTORY,
    (VP.AWAIT_APPROVAL, VehEvent.MSG_APPROVE): VP.TRAJECTORY_TRACKING,
    (VP.AWAIT_APPROVAL, VehEvent.MSG_REJECT): VP.AWAIT_TRAJECTORY,
    (VP.TRAJECTORY_TRACKING, VehEvent.PATH_END): VP.AWAIT_TRAJECTORY,
    (VP.TRAJECTORY_TRACKING, VehEvent.COLLISION_RISK): VP.EMERGENCY_STOP,
    (VP.EMERGENCY_STOP, VehEvent.MRM_COMPLETE): VP.AWAIT_TRAJECTORY,
    (VP.HANDOVER, VehEvent.HANDOVER_COMPLETE): VP.AUTOMATED_OPERATION,
    (VP.EMERGENCY_STOP, VehEvent.MSG_ESTOP): VP.EMERGENCY_STOP,
    (VP.EMERGENCY_STOP, VehEvent.LINK_LOST): VP.EMERGENCY_STOP,
}
for ph in (VP.AWAIT_TRAJECTORY, VP.TRAJECTORY_CHECK, VP.AWAIT_APPROVAL, VP.TRAJECTORY_TRACKING):
    EXPECTED_VEHICLE[(ph, VehEvent.MSG_ESTOP)] = VP.EMERGENCY_STOP
    EXPECTED_VEHICLE[(ph, VehEvent.LINK_LOST)] = VP.EMERGENCY_STOP


class TestExhaustiveEnumeration:
    def test_operator_matches_expected_exactly(self):
        for phase, event in itertools.product(OP, OpEvent):
            if event in OP_ALWAYS_OK:
                nxt, msgs = state_step_operator(phase, event)
                assert nxt == phase and msgs == []
                continue
            expected = EXPECTED_OPERATOR.get((phase, event))
            if expected is None:
                with pytest.raises(IllegalTransition):
                    state_step_operator(phase, event)
            else:
                nxt, _ = state_step_operator(phase, event)
                assert nxt == expected, (phase, event)

    def test_vehicle_matches_expected_exactly(self):
        for phase, event in itertools.product(VP, VehEvent):
            if event in VEH_ALWAYS_OK:
                nxt, msgs = state_step_vehicle(phase, event)
                assert nxt == phase and msgs == []
                continue
            expected = EXPECTED_VEHICLE.get((phase, event))
            if expected is None:
                with pytest.raises(IllegalTransition):
                    state_step_vehicle(phase, event)
            else:
                nxt, _ = state_step_vehicle(phase, event)
                assert nxt == expected, (phase, event)

    def test_tables_have_no_stray_entries(self):
        assert set(OPERATOR_TRANSITIONS) == set(EXPECTED_OPERATOR)
        assert set(VEHICLE_TRANSITIONS) == set(EXPECTED_VEHICLE)


class TestSpecExamples:
    def test_check_ok_advances_to_approval(self):
        nxt, msgs = state_step_operator(OP.AWAIT_CHECK, OpEvent.MSG_CHECK_OK)
        assert nxt == OP.TRAJECTORY_APPROVAL and msgs == []

    def test_estop_from_monitoring(self):
        nxt, msgs = state_step_operator(OP.MONITORING, OpEvent.UI_ESTOP)
        assert nxt == OP.EMERGENCY_STOPPED
        assert [m.type for m in msgs] == [MessageType.EMERGENCY_STOP]

    def test_approve_without_proposal_is_illegal(self):
        with pytest.raises(IllegalTransition):
            state_step_operator(OP.IDLE, OpEvent.UI_APPROVE)

    def test_vehicle_loss_during_tracking_triggers_mrm(self):
        nxt, msgs = state_step_vehicle(VP.TRAJECTORY_TRACKING, VehEvent.LINK_LOST,
                                       {"cause": "network_loss"})
        assert nxt == VP.EMERGENCY_STOP
        assert msgs[0].type == MessageType.MRM_EXECUTED
        assert msgs[0].payload["cause"] == "network_loss"
        assert msgs[0].payload["stage"] == "triggered"

    def test_vehicle_reject_returns_to_await(self):
        nxt, msgs = state_step_vehicle(VP.AWAIT_APPROVAL, VehEvent.MSG_REJECT)
        assert nxt == VP.AWAIT_TRAJECTORY and msgs == []

    def test_mrm_complete_reports_and_awaits(self):
        nxt, msgs = state_step_vehicle(VP.EMERGENCY_STOP, VehEvent.MRM_COMPLETE,
                                       {"cause": "operator_stop"})
        assert nxt == VP.AWAIT_TRAJECTORY
        assert msgs[0].type == MessageType.MRM_EXECUTED
        assert msgs[0].payload["stage"] == "completed"


def reachable_joint_states():
    """BFS over the joint graph with the session's message couplings."""
    # couplings: operator emissions drive vehicle events and vice versa
    start = (OP.IDLE, VP.AUTOMATED_OPERATION)
    seen = {start}
    frontier = [start]
    while frontier:
        op, vp = frontier.pop()
        nexts = []
        # operator-driven
        for (p, ev), nop in OPERATOR_TRANSITIONS.items():
            if p != op:
                continue
            nvp = vp
            if ev == OpEvent.UI_SUBMIT and vp == VP.AWAIT_TRAJECTORY:
                nvp = VP.TRAJECTORY_CHECK
            elif ev == OpEvent.UI_APPROVE and vp == VP.AWAIT_APPROVAL:
                nvp = VP.TRAJECTORY_TRACKING
            elif ev == OpEvent.UI_REJECT and vp == VP.AWAIT_APPROVAL:
                nvp = VP.AWAIT_TRAJECTORY
            elif ev == OpEvent.UI_ESTOP and vp in (
                    VP.AWAIT_TRAJECTORY, VP.TRAJECTORY_CHECK, VP.AWAIT_APPROVAL,
                    VP.TRAJECTORY_TRACKING):
                nvp = VP.EMERGENCY_STOP
            elif ev == OpEvent.UI_END_SESSION and vp == VP.AWAIT_TRAJECTORY:
                nvp = VP.HANDOVER
            nexts.append((nop, nvp))
        # vehicle-driven
        for (p, ev), nvp in VEHICLE_TRANSITIONS.items():
            if p != vp:
                continue
            nop = op
            if ev == VehEvent.DISENGAGE and op == OP.IDLE:
                nop = OP.TAKEOVER
            elif ev == VehEvent.CHECK_PASSED and op == OP.AWAIT_CHECK:
                nop = OP.TRAJECTORY_APPROVAL
            elif ev == VehEvent.CHECK_FAILED and op == OP.AWAIT_CHECK:
                nop = OP.TRAJECTORY_CREATION
            elif ev == VehEvent.PATH_END and op == OP.MONITORING:
                nop = OP.TRAJECTORY_CREATION
            elif ev in (VehEvent.MSG_ESTOP, VehEvent.LINK_LOST, VehEvent.COLLISION_RISK,
                        VehEvent.MRM_COMPLETE):
                if op in (OP.TRAJECTORY_CREATION, OP.AWAIT_CHECK, OP.TRAJECTORY_APPROVAL,
                          OP.MONITORING) and ev != VehEvent.MSG_ESTOP:
                    nop = OP.EMERGENCY_STOPPED  # mrm_executed notification lands
            nexts.append((nop, nvp))
        for js in nexts:
            if js not in seen:
                seen.add(js)
                frontier.append(js)
    return seen


IN_SESSION_VEHICLE = (VP.AWAIT_TRAJECTORY, VP.TRAJECTORY_CHECK, VP.AWAIT_APPROVAL,
                      VP.TRAJECTORY_TRACKING)


class TestJointGraph:
    def test_safety_reachability_within_two_transitions(self):
        # from every in-session joint state, events from {e-stop, loss} bring
        # the vehicle to EmergencyStop in at most 2 transitions
        for op, vp in reachable_joint_states():
            if vp not in IN_SESSION_VEHICLE:
                continue
            # vehicle-side loss is always available in-session: 1 transition
            nxt, _ = state_step_vehicle(vp, VehEvent.LINK_LOST)
            assert nxt == VP.EMERGENCY_STOP
            # operator e-stop, when available, needs operator + vehicle steps
            if (op, OpEvent.UI_ESTOP) in OPERATOR_TRANSITIONS:
                _, msgs = state_step_operator(op, OpEvent.UI_ESTOP)
                assert any(m.type == MessageType.EMERGENCY_STOP for m in msgs)
                nxt, _ = state_step_vehicle(vp, VehEvent.MSG_ESTOP)
                assert nxt == VP.EMERGENCY_STOP

    def test_no_reachable_deadlock(self):
        for op, vp in reachable_joint_states():
            has_op = any(p == op for (p, _e) in OPERATOR_TRANSITIONS)
            has_veh = any(p == vp for (p, _e) in VEHICLE_TRANSITIONS)
            assert has_op or has_veh, f"deadlock at ({op}, {vp})"

    def test_emergency_stop_reachable_states_recover(self):
        # EmergencyStop always has MRM_COMPLETE enabled; EmergencyStopped
        # always has the operator acknowledgment enabled
        assert (VP.EMERGENCY_STOP, VehEvent.MRM_COMPLETE) in VEHICLE_TRANSITIONS
        assert (OP.EMERGENCY_STOPPED, OpEvent.UI_ACK_MRM) in OPERATOR_TRANSITIONS
