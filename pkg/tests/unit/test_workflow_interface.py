import unittest

from inpaint_core import StandardWorkflowManager
from inpaint_core.workflow import WorkflowManager, Workflow, FlowContext, WorkflowStep


class DummyStep(WorkflowStep):
    def __init__(self, name="dummy", status="ok"):
        self._name = name
        self._status = status

    def name(self) -> str:
        return self._name

    def execute(self, context: FlowContext):
        context.params.setdefault("ran", []).append(self._name)
        return {"status": self._status}


class DummyWorkflow(Workflow):
    def id(self) -> str:
        return "dummy_workflow"

    def plan(self, context: FlowContext):
        return [DummyStep()]

    def run(self, context: FlowContext):
        return {"status": "ok"}


class StepOnlyWorkflow(Workflow):
    def __init__(self, steps):
        self._steps = steps

    def id(self) -> str:
        return "step_only"

    def plan(self, context: FlowContext):
        return self._steps

    def run(self, context: FlowContext):
        raise NotImplementedError


class TestWorkflowInterface(unittest.TestCase):
    def test_manager_protocol_compliance(self):
        mgr = StandardWorkflowManager()
        self.assertIsInstance(mgr, WorkflowManager)

    def test_manager_runs_workflow(self):
        mgr = StandardWorkflowManager()
        ctx = FlowContext(command="gen-data", params={})
        res = mgr.run(DummyWorkflow(), ctx)
        self.assertEqual(res.get("status"), "ok")

    def test_fallback_runs_planned_steps(self):
        ctx = FlowContext(command="eval")
        res = StandardWorkflowManager().run(StepOnlyWorkflow([DummyStep("a"), DummyStep("b")]), ctx)
        self.assertEqual(res["status"], "success")
        self.assertEqual(ctx.params["ran"], ["a", "b"])

    def test_fallback_stops_at_first_failure(self):
        ctx = FlowContext(command="eval")
        res = StandardWorkflowManager().run(
            StepOnlyWorkflow([DummyStep("a", "error"), DummyStep("b")]), ctx)
        self.assertEqual(res["status"], "error")
        self.assertEqual(res["code"], "step_failed")
        self.assertEqual(ctx.params["ran"], ["a"])


if __name__ == '__main__':
    unittest.main()
