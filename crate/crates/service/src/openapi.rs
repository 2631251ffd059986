use serde_json::{json, Value};

fn error_response(description: &str) -> Value {
    json!({
        "description": description,
        "content": {"application/json": {"schema": {"$ref": "#/components/schemas/Error"}}}
    })
}

/// OpenAPI 3.1 description of the `/v1` API.
pub fn openapi_document() -> Value {
    json!({
        "openapi": "3.1.0",
        "info": {
            "title": "lexdiff",
            "version": env!("CARGO_PKG_VERSION"),
            "description": "Per-word, L1-specific English lexical difficulty with feature-group attributions. Higher difficulty scores mean easier words."
        },
        "paths": {
            "/v1/languages": {
                "get": {
                    "operationId": "listLanguages",
                    "summary": "L1 models currently loaded",
                    "responses": {
                        "200": {
                            "description": "Loaded L1 codes",
                            "content": {"application/json": {"schema": {
                                "type": "array", "items": {"$ref": "#/components/schemas/L1"}
                            }}}
                        },
                        "500": error_response("A model directory could not be loaded")
                    }
                }
            },
            "/v1/annotate": {
                "post": {
                    "operationId": "annotate",
                    "summary": "Tokenize text and score every known word",
                    "requestBody": {
                        "required": true,
                        "content": {"application/json": {"schema": {"$ref": "#/components/schemas/AnnotateRequest"}}}
                    },
                    "responses": {
                        "200": {
                            "description": "Tokens in input order; their texts concatenate to the input",
                            "content": {"application/json": {"schema": {"$ref": "#/components/schemas/AnnotateResponse"}}}
                        },
                        "400": error_response("Unknown or unloaded L1, or malformed body"),
                        "413": error_response("Text exceeds the configured size limit"),
                        "422": error_response("Empty text")
                    }
                }
            },
            "/v1/word/{l1}/{lemma}": {
                "get": {
                    "operationId": "getWord",
                    "summary": "Report for one lemma, with its POS alternatives",
                    "parameters": [
                        {"name": "l1", "in": "path", "required": true, "schema": {"$ref": "#/components/schemas/L1"}},
                        {"name": "lemma", "in": "path", "required": true, "schema": {"type": "string"}},
                        {"name": "pos", "in": "query", "required": false,
                         "description": "Part of speech; defaults to the lemma's most frequent POS",
                         "schema": {"type": "string"}},
                        {"name": "include_extension", "in": "query", "required": false,
                         "schema": {"type": "boolean", "default": false}}
                    ],
                    "responses": {
                        "200": {
                            "description": "Word report",
                            "content": {"application/json": {"schema": {"$ref": "#/components/schemas/WordResponse"}}}
                        },
                        "400": error_response("Unknown or unloaded L1"),
                        "404": error_response("Unknown lemma or POS")
                    }
                }
            },
            "/v1/openapi.json": {
                "get": {
                    "operationId": "openapi",
                    "summary": "This document",
                    "responses": {"200": {"description": "OpenAPI document", "content": {"application/json": {}}}}
                }
            }
        },
        "components": {
            "schemas": {
                "L1": {"type": "string", "enum": ["es", "de", "zh"]},
                "Error": {
                    "type": "object",
                    "required": ["error"],
                    "properties": {"error": {
                        "type": "object",
                        "required": ["code", "message"],
                        "properties": {"code": {"type": "string"}, "message": {"type": "string"}}
                    }}
                },
                "AnnotateRequest": {
                    "type": "object",
                    "required": ["text", "l1"],
                    "additionalProperties": false,
                    "properties": {
                        "text": {"type": "string"},
                        "l1": {"type": "string"},
                        "include_extension": {"type": "boolean", "default": false}
                    }
                },
                "AnnotatedToken": {
                    "type": "object",
                    "required": ["text", "start", "end", "kind", "known"],
                    "properties": {
                        "text": {"type": "string"},
                        "start": {"type": "integer", "description": "UTF-8 byte offset"},
                        "end": {"type": "integer", "description": "UTF-8 byte offset, exclusive"},
                        "kind": {"type": "string", "enum": ["word", "space", "punct", "other"]},
                        "known": {"type": "boolean"},
                        "report": {"$ref": "#/components/schemas/WordReport"}
                    }
                },
                "AnnotateResponse": {
                    "type": "object",
                    "required": ["l1", "quintiles", "tokens"],
                    "properties": {
                        "l1": {"$ref": "#/components/schemas/L1"},
                        "quintiles": {
                            "type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4,
                            "description": "Interior quintile edges of the training difficulty distribution"
                        },
                        "tokens": {"type": "array", "items": {"$ref": "#/components/schemas/AnnotatedToken"}}
                    }
                },
                "FeatureContribution": {
                    "type": "object",
                    "required": ["feature", "group", "value", "phi"],
                    "properties": {
                        "feature": {"type": "string"},
                        "group": {"type": "string", "enum": ["familiarity", "meaning", "surface", "transfer"]},
                        "value": {"type": ["number", "string", "null"]},
                        "phi": {"type": "number"}
                    }
                },
                "WordReport": {
                    "type": "object",
                    "required": ["lemma", "pos", "l1", "item_id", "source_word", "clue_letter", "predicted",
                                 "gold", "bin", "gold_bin", "group_shares", "top_features", "extension", "n_models"],
                    "properties": {
                        "lemma": {"type": "string"},
                        "pos": {"type": "string"},
                        "l1": {"$ref": "#/components/schemas/L1"},
                        "item_id": {"type": "string"},
                        "source_word": {"type": "string"},
                        "clue_letter": {"type": "string"},
                        "predicted": {"type": "number"},
                        "gold": {"type": ["number", "null"]},
                        "bin": {"type": "integer", "minimum": 0, "maximum": 4},
                        "gold_bin": {"type": ["integer", "null"], "minimum": 0, "maximum": 4},
                        "group_shares": {
                            "type": "object",
                            "description": "Shares sum to 1",
                            "required": ["familiarity", "meaning", "surface", "transfer"],
                            "properties": {
                                "familiarity": {"type": "number"},
                                "meaning": {"type": "number"},
                                "surface": {"type": "number"},
                                "transfer": {"type": "number"}
                            }
                        },
                        "top_features": {
                            "type": "array",
                            "description": "Sorted by |phi| descending",
                            "items": {"$ref": "#/components/schemas/FeatureContribution"}
                        },
                        "extension": {"type": "boolean"},
                        "n_models": {"type": "integer"}
                    }
                },
                "WordResponse": {
                    "allOf": [
                        {"$ref": "#/components/schemas/WordReport"},
                        {"type": "object", "required": ["alternatives"],
                         "properties": {"alternatives": {"type": "array", "items": {"type": "string"}}}}
                    ]
                }
            }
        }
    })
}
