# Run registry: manifests and metric reports
