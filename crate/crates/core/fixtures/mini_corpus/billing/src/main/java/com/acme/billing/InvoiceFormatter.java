package com.acme.billing;

import com.acme.billing.util.Currency;

/* Formats invoices
   for plain-text statements. */
public class InvoiceFormatter {
    private static final char SEPARATOR = '|';

    public String format(Invoice invoice) {
        StringBuilder sb = new StringBuilder();
        sb.append("INVOICE").append(SEPARATOR);
        sb.append(invoice.describe());
        if (invoice.isPaid()) {
            sb.append(" [paid]");
        }
        return sb.toString();
    }
}
