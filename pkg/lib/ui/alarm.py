import logging

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FALSIFIED = 1
EXIT_USAGE = 2


class FalsificationAlarm:
    """Collect falsification events of a run and turn them into an exit status."""

    def __init__(self):
        self.is_alarm_active = False
        self.alarm_type = None
        self.events = []

    def trigger_alarm(self, alarm_type, message=''):
        self.is_alarm_active = True
        if self.alarm_type is None:
            self.alarm_type = alarm_type
        self.events.append((alarm_type, message))
        log.warning('ALARM %s: %s', alarm_type, message)

    def check_violations(self, alarm_type, violations):
        """Audits and validations: any entry in the list is an event."""
        violations = list(violations)
        if violations:
            self.trigger_alarm(alarm_type, '%d Verletzungen, erste: %s' % (len(violations), violations[0]))
        return not violations

    def check_report(self, alarm_type, report):
        """Experiment reports carrying 'holds' and/or a 'violations' count or list."""
        holds = report.get('holds', True)
        violations = report.get('violations', 0)
        count = len(violations) if isinstance(violations, (list, tuple)) else int(violations or 0)
        if not holds or count:
            self.trigger_alarm(alarm_type, 'holds=%s, Verletzungen=%s' % (holds, violations))
            return False
        return True

    def stop_alarm(self):
        self.is_alarm_active = False
        self.alarm_type = None
        self.events = []

    def exit_code(self):
        return EXIT_FALSIFIED if self.is_alarm_active else EXIT_OK
