namespace autoode {}
