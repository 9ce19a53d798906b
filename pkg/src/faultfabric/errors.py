"""Error taxonomy shared across the fabric, mapper, agents, and service layers.

Every error carries a stable ``code`` string that the REST layer maps to an
HTTP status and that the CLI prints verbatim.
"""


class FaultFabricError(Exception):
    code = "error"
    http_status = 400

    def __init__(self, message: str = ""):
        super().__init__(message or self.__class__.__name__)
        self.message = message or self.__class__.__name__


# --- topology / fabric ---

class ParseError(FaultFabricError):
    code = "parse_error"


class ValidationError(FaultFabricError):
    code = "validation_error"


class NotFound(FaultFabricError):
    code = "not_found"
    http_status = 404


class Unreachable(FaultFabricError):
    code = "unreachable"


class Busy(FaultFabricError):
    code = "busy"
    http_status = 409


class Conflict(FaultFabricError):
    code = "conflict"
    http_status = 409


class StaleSnapshot(FaultFabricError):
    code = "stale_snapshot"
    http_status = 409


class NoBackendAvailable(FaultFabricError):
    code = "no_backend_available"
    http_status = 503


# --- fault engine ---

class OutOfWindow(FaultFabricError):
    code = "out_of_window"


class EmptyPayload(FaultFabricError):
    code = "empty_payload"


# --- agents ---

class WrongHost(FaultFabricError):
    code = "wrong_host"


class AlreadyInjected(FaultFabricError):
    code = "already_injected"
    http_status = 409


class NotInjected(FaultFabricError):
    code = "not_injected"


# --- orchestrator / workload ---

class UnknownTenant(FaultFabricError):
    code = "unknown_tenant"
    http_status = 404


class UnknownResource(FaultFabricError):
    code = "unknown_resource"
    http_status = 404


class NotOwner(FaultFabricError):
    code = "not_owner"
    http_status = 403


class ItemBusy(FaultFabricError):
    code = "item_busy"
    http_status = 409


class PlanInvalid(FaultFabricError):
    code = "plan_invalid"


class CampaignAlreadyRunning(FaultFabricError):
    code = "campaign_already_running"
    http_status = 409


class UnknownCampaign(FaultFabricError):
    code = "unknown_campaign"
    http_status = 404


class UnknownInjection(FaultFabricError):
    code = "unknown_injection"
    http_status = 404


class AlreadyFinished(FaultFabricError):
    code = "already_finished"


class NotTerminated(FaultFabricError):
    code = "not_terminated"


class RestoreFailed(FaultFabricError):
    code = "restore_failed"
    http_status = 500


class BadAttach(FaultFabricError):
    code = "bad_attach"


class EmptyWindow(FaultFabricError):
    code = "empty_window"
